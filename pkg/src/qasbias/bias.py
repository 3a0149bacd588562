"""Longitudinal bias fields ``H_bias = -sum_i mu_i s_i``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .exact_cover import SpinConfiguration


@dataclass(frozen=True)
class BiasField:
    """Per-spin bias with one common magnitude.

    ``d``, ``seed`` are provenance metadata (None when not applicable).
    """

    mu: tuple[float, ...]
    d: int | None = None
    seed: int | None = None

    def __post_init__(self):
        mu = tuple(float(x) for x in self.mu)
        mags = {abs(x) for x in mu}
        if len(mags) > 1:
            raise ParameterError(f"bias magnitudes must be equal, got {sorted(mags)}")
        object.__setattr__(self, "mu", mu)

    @property
    def n(self) -> int:
        return len(self.mu)

    @property
    def strength(self) -> float:
        return abs(self.mu[0]) if self.mu else 0.0

    def is_null(self) -> bool:
        return self.strength == 0.0

    def scaled(self, k: float) -> "BiasField":
        return BiasField(tuple(k * x for x in self.mu), self.d, self.seed)

    def energy_vector(self) -> np.ndarray:
        """``-sum_i mu_i s_i`` for every packed configuration."""
        n = self.n
        k = np.arange(1 << n, dtype=np.int64)
        e = np.zeros(k.shape)
        for i, m in enumerate(self.mu):
            if m:
                e -= m * (((k >> i) & 1) * 2 - 1)
        return e

    def to_dict(self) -> dict:
        return {"mu": list(self.mu), "d": self.d, "b": self.strength, "seed": self.seed}


def null_bias(n: int) -> BiasField:
    return BiasField((0.0,) * n)


def make_bias(reference: SpinConfiguration, d: int, strength: float, seed) -> BiasField:
    """Bias along ``reference`` with exactly ``d`` uniformly chosen sites flipped."""
    n = len(reference)
    if not 0 <= d <= n:
        raise ParameterError(f"need 0 <= d <= n, got d={d}, n={n}")
    if not strength > 0:
        raise ParameterError(f"bias strength must be positive, got {strength}")
    rng = np.random.default_rng(seed)
    flips = set(rng.choice(n, size=d, replace=False).tolist())
    mu = tuple(-strength * s if i in flips else strength * s for i, s in enumerate(reference))
    return BiasField(mu, d, seed if isinstance(seed, int) else None)


def bias_from_sample(sample: SpinConfiguration, strength: float) -> BiasField:
    if strength < 0:
        raise ParameterError(f"bias strength must be non-negative, got {strength}")
    return BiasField(tuple(strength * s for s in sample))


def hamming_distance(bias: BiasField, reference: SpinConfiguration) -> int:
    """Number of spins where ``sign(mu_i)`` disagrees with the reference.

    A null bias has distance 0 by convention.
    """
    if bias.n != len(reference):
        raise DimensionError(f"bias has {bias.n} sites, reference has {len(reference)}")
    if bias.is_null():
        return 0
    return sum(1 for m, s in zip(bias.mu, reference) if (m > 0) != (s > 0))


def error_ratio(d: int, n: int) -> float:
    """Ratio of misleading to helpful bias terms, ``d / (n - d)``."""
    if not 0 <= d <= n:
        raise ParameterError(f"need 0 <= d <= n, got d={d}, n={n}")
    if d == n:
        raise ParameterError("error ratio undefined for d == n")
    return d / (n - d)
