"""Annealing envelopes A(s), B(s) on normalized time s = t / tau.

Energies are in h*GHz and tau in microseconds.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ParameterError

EPS = 1e-12
DEFAULT_TABLE = "dw2000q_like.csv"


@dataclass(frozen=True)
class Schedule:
    kind: str  # "linear" | "tabulated"
    a_max: float
    b_max: float
    tau: float = 1.0
    table: tuple[tuple[float, float, float], ...] | None = None
    name: str | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "tabulated"):
            raise ParameterError(f"unknown schedule kind {self.kind!r}")
        if self.tau < 0:
            raise ParameterError(f"tau must be non-negative, got {self.tau}")
        if self.kind == "tabulated":
            if not self.table or len(self.table) < 2:
                raise ParameterError("tabulated schedule needs at least two rows")
            s = np.array([r[0] for r in self.table])
            if np.any(np.diff(s) <= 0):
                raise ParameterError("schedule s values must be strictly increasing")
            if s[0] != 0.0 or s[-1] != 1.0:
                raise ParameterError("schedule table must cover s = 0 and s = 1")
        a0, b0 = self(0.0)
        a1, _ = self(1.0)
        if a0 / max(b0, EPS) < 10:
            raise ParameterError(f"need A(0) >> B(0); got A(0)={a0}, B(0)={b0}")
        if a1 > 0.01 * a0:
            raise ParameterError(f"driver must be off at s=1; got A(1)={a1}, A(0)={a0}")

    @classmethod
    def linear(cls, a_max: float = 6.0, b_max: float = 12.0, tau: float = 1.0) -> "Schedule":
        return cls("linear", float(a_max), float(b_max), float(tau))

    @classmethod
    def from_rows(cls, rows, tau: float = 1.0, name: str | None = None) -> "Schedule":
        rows = tuple((float(s), float(a), float(b)) for s, a, b in rows)
        if not rows:
            raise ParameterError("empty schedule table")
        return cls("tabulated", rows[0][1], rows[-1][2], float(tau), rows, name)

    @classmethod
    def from_csv(cls, path, tau: float = 1.0) -> "Schedule":
        path = Path(path)
        return cls.from_rows(_parse_csv(path.read_text(), str(path)), tau, path.name)

    @classmethod
    def default(cls, tau: float = 1.0) -> "Schedule":
        text = resources.files("qasbias.data").joinpath(DEFAULT_TABLE).read_text()
        return cls.from_rows(_parse_csv(text, DEFAULT_TABLE), tau, DEFAULT_TABLE)

    def with_tau(self, tau: float) -> "Schedule":
        return replace(self, tau=float(tau))

    def __call__(self, s):
        """Return ``(A, B)`` at ``s``; scalar or array input."""
        arr = np.asarray(s, dtype=float)
        if np.any(arr < 0) or np.any(arr > 1) or np.any(~np.isfinite(arr)):
            raise ParameterError(f"s must lie in [0, 1], got {s}")
        if self.kind == "linear":
            a, b = self.a_max * (1 - arr), self.b_max * arr
        else:
            tab = np.array(self.table)
            a = np.interp(arr, tab[:, 0], tab[:, 1])
            b = np.interp(arr, tab[:, 0], tab[:, 2])
        if arr.ndim == 0:
            return float(a), float(b)
        return a, b

    def peak(self) -> float:
        """Largest value of either envelope."""
        if self.kind == "linear":
            return max(self.a_max, self.b_max)
        tab = np.array(self.table)
        return float(max(tab[:, 1].max(), tab[:, 2].max()))

    @property
    def id(self) -> str:
        if self.kind == "linear":
            return f"linear:a={self.a_max:g}:b={self.b_max:g}"
        text = "\n".join(f"{s!r},{a!r},{b!r}" for s, a, b in self.table)
        digest = hashlib.sha256(text.encode()).hexdigest()[:12]
        return f"tabulated:{self.name or 'table'}:{digest}"

    def to_csv(self) -> str:
        if self.kind == "linear":
            rows = [(0.0, self.a_max, 0.0), (1.0, 0.0, self.b_max)]
        else:
            rows = self.table
        return "s,A,B\n" + "".join(f"{s!r},{a!r},{b!r}\n" for s, a, b in rows)


def _parse_csv(text: str, source: str) -> list[tuple[float, float, float]]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or [c.strip() for c in lines[0].split(",")] != ["s", "A", "B"]:
        raise ParameterError(f"{source}: header must be 's,A,B'")
    rows = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 3:
            raise ParameterError(f"{source}:{lineno}: expected 3 columns")
        try:
            rows.append(tuple(float(p) for p in parts))
        except ValueError as exc:
            raise ParameterError(f"{source}:{lineno}: {exc}") from exc
    return rows


def schedule_eval(schedule: Schedule, s: float) -> tuple[float, float]:
    return schedule(s)
