"""State-vector annealing under ``H(t) = A(t) H_drive + B(t) [H_P + H_bias]``.

The driver is ``driver_sign * sum_i X_i`` (default -1, the ground state of
which is the all-positive uniform superposition). Each step of length dt
applies half a diagonal phase, one transverse rotation per qubit, and
another half diagonal phase, with A and B frozen at the step midpoint.
Adjacent half phases are merged, so each step costs one diagonal pass and
n pair-mixing passes over the 2^n amplitudes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bias import BiasField
from .errors import CapacityError, DimensionError, NumericalError, ParameterError
from .exact_cover import SpinConfiguration
from .ising import IsingModel, energy_vector
from .schedule import Schedule

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

# rad per (GHz * microsecond): phase = 2*pi * f[GHz] * t[ns]
OMEGA = 2 * math.pi * 1e3
MAX_N = 26
DEFAULT_MAX_PHASE = 0.05


@dataclass(frozen=True)
class DiagonalProblem:
    """Diagonal energies over packed configurations, offset excluded.

    ``problem`` and ``bias`` are kept apart so the bias can follow either
    envelope; ``energies`` is their sum.
    """

    n: int
    problem: np.ndarray
    bias: np.ndarray
    offset: float = 0.0
    mu: tuple[float, ...] | None = None

    @property
    def energies(self) -> np.ndarray:
        return self.problem + self.bias

    def permuted(self, perm) -> "DiagonalProblem":
        """Relabel spin ``i`` as ``perm[i]``."""
        idx = _permuted_index(self.n, perm)
        out_p = np.empty_like(self.problem)
        out_b = np.empty_like(self.bias)
        out_p[idx] = self.problem
        out_b[idx] = self.bias
        mu = None
        if self.mu is not None:
            mu = [0.0] * self.n
            for i, p in enumerate(perm):
                mu[p] = self.mu[i]
            mu = tuple(mu)
        return DiagonalProblem(self.n, out_p, out_b, self.offset, mu)


def _permuted_index(n: int, perm) -> np.ndarray:
    k = np.arange(1 << n, dtype=np.int64)
    out = np.zeros_like(k)
    for i, p in enumerate(perm):
        out |= ((k >> i) & 1) << p
    return out


@dataclass
class StateVector:
    n: int
    amplitudes: np.ndarray

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm_error(self) -> float:
        return abs(float(np.sum(self.probabilities())) - 1.0)


def build_diagonal(model: IsingModel, bias: BiasField | None = None, max_n: int = MAX_N) -> DiagonalProblem:
    if model.n > max_n:
        raise CapacityError(f"n={model.n} exceeds engine capacity {max_n}")
    if bias is not None and bias.n != model.n:
        raise DimensionError(f"bias has {bias.n} sites, model has {model.n}")
    problem = energy_vector(model, include_offset=False).astype(np.float64)
    if bias is None or bias.is_null():
        return DiagonalProblem(model.n, problem, np.zeros_like(problem), float(model.offset))
    return DiagonalProblem(model.n, problem, bias.energy_vector(), float(model.offset), bias.mu)


def initial_state(n: int, driver_sign: int = -1, dtype=np.complex128, mu=None) -> StateVector:
    """Ground state of ``driver_sign * sum_i X_i - sum_i mu_i Z_i``.

    Without ``mu`` this is the uniform superposition (alternating signs for
    a positive driver). With ``mu`` it is a product of tilted spins.
    """
    if mu is not None and any(mu):
        amp = np.ones(1, dtype=dtype)
        for m in reversed(mu):
            # basis order (s=-1, s=+1); -mu Z = diag(mu, -mu)
            _, vecs = np.linalg.eigh(np.array([[m, driver_sign], [driver_sign, -m]], dtype=float))
            v = vecs[:, 0] * np.sign(vecs[:, 0].sum() or 1.0)
            amp = np.kron(amp, v.astype(dtype))
        return StateVector(len(mu), amp)
    dim = 1 << n
    amp = np.full(dim, 1 / math.sqrt(dim), dtype=dtype)
    if driver_sign > 0:
        k = np.arange(dim)
        parity = np.zeros(dim, dtype=np.int64)
        for i in range(n):
            parity ^= (k >> i) & 1
        amp[parity == 1] *= -1
    return StateVector(n, amp)


def default_dt(schedule: Schedule, max_phase: float = DEFAULT_MAX_PHASE) -> float:
    """Time step (us) keeping ``max(A, B) * dt`` below ``max_phase`` rad."""
    return max_phase / (OMEGA * schedule.peak())


def step_count(schedule: Schedule, dt: float | None = None, max_phase: float = DEFAULT_MAX_PHASE) -> int:
    if dt is None:
        return max(10, math.ceil(schedule.tau / default_dt(schedule, max_phase) - 1e-9))
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    steps = math.ceil(schedule.tau / dt - 1e-9)
    if steps < 10:
        raise ParameterError(f"dt={dt} gives {steps} steps for tau={schedule.tau}; need >= 10")
    return steps


def _step_coefficients(schedule: Schedule, steps: int, bias_with: str):
    s_mid = (np.arange(steps) + 0.5) / steps
    a, b = schedule(s_mid)
    a, b = np.atleast_1d(a), np.atleast_1d(b)
    dt = schedule.tau / steps
    if bias_with == "problem":
        cb = b
    elif bias_with == "driver":
        cb = a
    else:
        raise ParameterError(f"bias_with must be 'problem' or 'driver', got {bias_with!r}")
    return OMEGA * dt * a, OMEGA * dt * b, OMEGA * dt * cb


def _strang_numpy(psi, ep, eb, theta, wp, wb, sign):
    n = int(psi.size).bit_length() - 1
    steps = theta.size
    for k in range(steps):
        if k == 0:
            hp, hb = 0.5 * wp[0], 0.5 * wb[0]
        else:
            hp, hb = 0.5 * (wp[k - 1] + wp[k]), 0.5 * (wb[k - 1] + wb[k])
        psi *= np.exp(-1j * (hp * ep + hb * eb))
        c = math.cos(theta[k])
        s = sign * math.sin(theta[k])
        for q in range(n):
            v = psi.reshape(1 << (n - 1 - q), 2, 1 << q)
            a0 = v[:, 0, :].copy()
            a1 = v[:, 1, :]
            v[:, 0, :] = c * a0 - 1j * s * a1
            v[:, 1, :] = c * a1 - 1j * s * a0
    psi *= np.exp(-1j * (0.5 * wp[-1] * ep + 0.5 * wb[-1] * eb))
    return psi


def _strang_kernel(psi, ep, eb, theta, wp, wb, sign):
    dim = psi.size
    n = 0
    while (1 << n) < dim:
        n += 1
    steps = theta.size
    for k in range(steps + 1):
        if k == 0:
            hp = 0.5 * wp[0]
            hb = 0.5 * wb[0]
        elif k == steps:
            hp = 0.5 * wp[k - 1]
            hb = 0.5 * wb[k - 1]
        else:
            hp = 0.5 * (wp[k - 1] + wp[k])
            hb = 0.5 * (wb[k - 1] + wb[k])
        for x in range(dim):
            ph = -(hp * ep[x] + hb * eb[x])
            psi[x] *= complex(math.cos(ph), math.sin(ph))
        if k == steps:
            break
        c = math.cos(theta[k])
        s = sign * math.sin(theta[k])
        ms = complex(0.0, -s)
        for q in range(n):
            bit = 1 << q
            for base in range(0, dim, 2 * bit):
                for x in range(base, base + bit):
                    a0 = psi[x]
                    a1 = psi[x + bit]
                    psi[x] = c * a0 + ms * a1
                    psi[x + bit] = ms * a0 + c * a1
    return psi


if numba is not None:
    _strang_compiled = numba.njit(cache=True, nogil=True)(_strang_kernel)
else:  # pragma: no cover
    _strang_compiled = None


def evolve(
    diag: DiagonalProblem,
    schedule: Schedule,
    dt: float | None = None,
    *,
    steps: int | None = None,
    driver_sign: int = -1,
    bias_with: str = "problem",
    backend: str = "auto",
    max_phase: float = DEFAULT_MAX_PHASE,
    dtype=np.complex128,
) -> StateVector:
    """Anneal from the driver ground state over ``schedule.tau`` microseconds.

    ``bias_with="driver"`` switches the bias off together with the driver
    instead of on with the problem term; the start is then the ground state
    of driver plus bias. ``steps`` overrides ``dt``; with
    neither, dt is the largest step keeping ``max(A, B) * dt <= max_phase``.
    """
    if driver_sign not in (-1, 1):
        raise ParameterError("driver_sign must be -1 or +1")
    # a bias that follows the driver is part of the initial Hamiltonian
    mu = diag.mu if bias_with == "driver" else None
    psi = initial_state(diag.n, driver_sign, dtype, mu).amplitudes
    if schedule.tau == 0:
        return StateVector(diag.n, psi)
    if steps is None:
        steps = step_count(schedule, dt, max_phase)
    elif steps < 1:
        raise ParameterError(f"steps must be >= 1, got {steps}")
    theta, wp, wb = _step_coefficients(schedule, steps, bias_with)
    ep = diag.problem.astype(np.float64)
    eb = diag.bias.astype(np.float64)
    if backend == "auto":
        backend = "numba" if _strang_compiled is not None else "numpy"
    if backend == "numba":
        psi = _strang_compiled(psi, ep, eb, theta, wp, wb, float(driver_sign))
    elif backend == "numpy":
        psi = _strang_numpy(psi, ep, eb, theta, wp, wb, float(driver_sign))
    else:
        raise ParameterError(f"unknown backend {backend!r}")
    if not np.all(np.isfinite(psi)):
        raise NumericalError("non-finite amplitudes after evolution")
    return StateVector(diag.n, psi)


def success_probability(state: StateVector, target: SpinConfiguration) -> float:
    if len(target) != state.n:
        raise DimensionError(f"target has {len(target)} spins, state has {state.n}")
    return float(abs(state.amplitudes[target.to_int()]) ** 2)


def sample_indices(state: StateVector, n_shots: int, seed) -> np.ndarray:
    if n_shots < 1:
        raise ParameterError(f"n_shots must be >= 1, got {n_shots}")
    p = state.probabilities()
    p = p / p.sum()
    rng = np.random.default_rng(seed)
    return rng.choice(p.size, size=n_shots, p=p)


def sample_shots(state: StateVector, n_shots: int, seed) -> list[SpinConfiguration]:
    """Projective measurements in the computational basis."""
    return [SpinConfiguration.from_int(int(k), state.n) for k in sample_indices(state, n_shots, seed)]


def dump_state(state: StateVector, path) -> None:
    """Debug dump: one ``index re im`` line per amplitude."""
    with Path(path).open("w") as fh:
        for k, a in enumerate(state.amplitudes):
            fh.write(f"{k} {float(a.real)!r} {float(a.imag)!r}\n")
