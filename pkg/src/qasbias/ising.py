"""Longitudinal Ising form of the exact-cover cost and hardware-range rescaling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DegenerateModelError, DimensionError
from .exact_cover import ProblemInstance, SpinConfiguration

# accessible parameter box of the target annealer
J_RANGE = (-2.0, 1.0)
H_RANGE = (-2.0, 2.0)


@dataclass(frozen=True)
class IsingModel:
    """``E(s) = sum_{i<j} J_ij s_i s_j + sum_i h_i s_i + offset``."""

    n: int
    couplings: Mapping[tuple[int, int], float]
    fields: tuple[float, ...]
    offset: float = 0
    scale_factor: float = field(default=1, compare=False)

    def __post_init__(self):
        if len(self.fields) != self.n:
            raise DimensionError(f"{len(self.fields)} fields for {self.n} spins")
        for i, j in self.couplings:
            if not 0 <= i < j < self.n:
                raise ValueError(f"coupling key {(i, j)} must satisfy 0 <= i < j < n")
        object.__setattr__(self, "couplings", dict(sorted(self.couplings.items())))
        object.__setattr__(self, "fields", tuple(self.fields))

    def is_zero(self) -> bool:
        return not any(self.fields) and not any(self.couplings.values())

    def coupling_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self.couplings:
            e = np.empty(0, dtype=np.int64)
            return e, e, np.empty(0)
        ij = np.array(list(self.couplings), dtype=np.int64)
        return ij[:, 0], ij[:, 1], np.array(list(self.couplings.values()))


def encode_ising(instance: ProblemInstance) -> IsingModel:
    """Expand ``sum_C (s_a + s_b + s_c - 1)^2`` using ``s^2 = 1``.

    Each clause contributes +2 to each of its three couplings, -2 to each
    member field and +4 to the offset. Coefficients stay integers.
    """
    couplings: dict[tuple[int, int], int] = {}
    fields = [0] * instance.n
    offset = 0
    for clause in instance.clauses:
        a, b, c = clause.members
        for pair in ((a, b), (a, c), (b, c)):
            couplings[pair] = couplings.get(pair, 0) + 2
        for i in (a, b, c):
            fields[i] -= 2
        offset += 4
    return IsingModel(instance.n, couplings, tuple(fields), offset)


def ising_energy(model: IsingModel, config: SpinConfiguration):
    if len(config) != model.n:
        raise DimensionError(f"config has {len(config)} spins, model has {model.n}")
    s = config.spins
    e = model.offset
    for (i, j), J in model.couplings.items():
        e += J * s[i] * s[j]
    for i, h in enumerate(model.fields):
        e += h * s[i]
    return e


def energy_vector(model: IsingModel, include_offset: bool = True) -> np.ndarray:
    """Energy of every packed configuration.

    Integer-valued models yield an int64 array, so comparisons against
    the clause cost are exact.
    """
    n = model.n
    k = np.arange(1 << n, dtype=np.int64)
    integral = all(float(x).is_integer() for x in (*model.fields, *model.couplings.values(), model.offset))
    dtype = np.int64 if integral else np.float64
    e = np.zeros(k.shape, dtype=dtype)
    spins = [(((k >> i) & 1) * 2 - 1) for i in range(n)]
    for i, h in enumerate(model.fields):
        if h:
            e += dtype(h) * spins[i]
    for (i, j), J in model.couplings.items():
        if J:
            e += dtype(J) * (spins[i] * spins[j])
    if include_offset and model.offset:
        e += dtype(model.offset)
    return e


def _bound(values, lo: float, hi: float) -> Fraction | None:
    """Largest k with every k*v in [lo, hi], or None if unconstrained."""
    ks = []
    for v in values:
        v = Fraction(v)
        if v > 0:
            ks.append(Fraction(hi) / v)
        elif v < 0:
            ks.append(Fraction(lo) / v)
    return min(ks) if ks else None


def rescale(model: IsingModel, extra_fields=None) -> tuple[IsingModel, float]:
    """Uniformly scale a model so it just fits J in [-2, 1] and h in [-2, 2].

    ``extra_fields`` (per-spin, e.g. ``-mu`` of a bias) are added to the
    fields when evaluating the bound only, for joint scaling of problem and
    bias. The returned model never contains them. The factor may exceed 1.
    """
    fields = list(model.fields)
    if extra_fields is not None:
        if len(extra_fields) != model.n:
            raise DimensionError("extra_fields length must equal n")
        fields = [Fraction(h) + Fraction(float(x)) for h, x in zip(fields, extra_fields)]
    if not any(fields) and not any(model.couplings.values()):
        raise DegenerateModelError("cannot rescale an all-zero model")
    bounds = [b for b in (_bound(model.couplings.values(), *J_RANGE), _bound(fields, *H_RANGE)) if b is not None]
    k = min(bounds)
    kf = float(k)
    scaled = IsingModel(
        model.n,
        {key: float(Fraction(J) * k) for key, J in model.couplings.items()},
        tuple(float(Fraction(h) * k) for h in model.fields),
        float(Fraction(model.offset) * k),
        scale_factor=float(Fraction(model.scale_factor) * k),
    )
    return scaled, kf


def model_to_dict(model: IsingModel) -> dict:
    return {
        "n": model.n,
        "offset": model.offset,
        "scale_factor": model.scale_factor,
        "fields": list(model.fields),
        "couplings": [[i, j, J] for (i, j), J in model.couplings.items()],
    }


def model_from_dict(doc: dict) -> IsingModel:
    return IsingModel(
        int(doc["n"]),
        {(int(i), int(j)): J for i, j, J in doc["couplings"]},
        tuple(doc["fields"]),
        doc.get("offset", 0),
        scale_factor=doc.get("scale_factor", 1),
    )


def save_model(model: IsingModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path) -> IsingModel:
    return model_from_dict(json.loads(Path(path).read_text()))
