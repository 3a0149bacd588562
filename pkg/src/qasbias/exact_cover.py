"""Exact-cover instances: clause costs, brute-force oracle, generator, file I/O.

Spins take values +1/-1. A configuration of ``n`` spins is packed into an
integer with bit ``i`` set when spin ``i`` is +1. A clause on three spins is
fulfilled when exactly one of them is -1, and its cost is
``(s_a + s_b + s_c - 1) ** 2``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CapacityError,
    DimensionError,
    GenerationError,
    InstanceParseError,
    InstanceValidationError,
    InvalidClauseError,
)

MAX_ENUM_N = 30
ORACLE_CHECK_N = 26
_CHUNK_BITS = 22


@dataclass(frozen=True)
class SpinConfiguration:
    spins: tuple[int, ...]

    def __post_init__(self):
        spins = tuple(int(s) for s in self.spins)
        if any(s not in (1, -1) for s in spins):
            raise ValueError(f"spins must be +1 or -1, got {self.spins!r}")
        object.__setattr__(self, "spins", spins)

    @property
    def n(self) -> int:
        return len(self.spins)

    def to_int(self) -> int:
        k = 0
        for i, s in enumerate(self.spins):
            if s == 1:
                k |= 1 << i
        return k

    @classmethod
    def from_int(cls, k: int, n: int) -> "SpinConfiguration":
        if k < 0 or k >= 1 << n:
            raise ValueError(f"index {k} out of range for {n} spins")
        return cls(tuple(1 if (k >> i) & 1 else -1 for i in range(n)))

    def flipped(self, sites: Iterable[int]) -> "SpinConfiguration":
        spins = list(self.spins)
        for i in sites:
            spins[i] = -spins[i]
        return SpinConfiguration(tuple(spins))

    def __len__(self) -> int:
        return len(self.spins)

    def __iter__(self):
        return iter(self.spins)

    def __getitem__(self, i):
        return self.spins[i]


@dataclass(frozen=True, order=True)
class Clause:
    members: tuple[int, int, int]

    def __post_init__(self):
        members = tuple(int(m) for m in self.members)
        if len(members) != 3:
            raise InvalidClauseError(f"clause needs exactly 3 members, got {members}")
        if len(set(members)) != 3:
            raise InvalidClauseError(f"clause members must be distinct, got {members}")
        if min(members) < 0:
            raise InvalidClauseError(f"negative spin index in clause {members}")
        object.__setattr__(self, "members", tuple(sorted(members)))

    def check(self, n: int) -> None:
        if self.members[2] >= n:
            raise InvalidClauseError(f"clause {self.members} out of range for {n} spins")

    def __iter__(self):
        return iter(self.members)


def _as_clause(c) -> Clause:
    return c if isinstance(c, Clause) else Clause(tuple(c))


@dataclass(frozen=True)
class ProblemInstance:
    """An exact-cover instance on ``n`` spins.

    Clauses are canonicalized (sorted triples, sorted list) on construction.
    When a solution is given it must fulfil every clause; uniqueness is the
    job of :func:`validate_instance`, which runs the brute-force oracle.
    """

    n: int
    clauses: tuple[Clause, ...]
    solution: SpinConfiguration | None = None
    label: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise InstanceValidationError(f"n must be an integer >= 3, got {self.n!r}")
        clauses = tuple(sorted(_as_clause(c) for c in self.clauses))
        for c in clauses:
            c.check(self.n)
        for a, b in zip(clauses, clauses[1:]):
            if a == b:
                raise InstanceValidationError(f"duplicate clause {a.members}")
        object.__setattr__(self, "clauses", clauses)
        sol = self.solution
        if sol is not None:
            if not isinstance(sol, SpinConfiguration):
                sol = SpinConfiguration(tuple(sol))
                object.__setattr__(self, "solution", sol)
            if sol.n != self.n:
                raise InstanceValidationError(
                    f"solution has {sol.n} spins, instance has {self.n}"
                )
            if total_cost(self, sol) != 0:
                raise InstanceValidationError("stored solution does not fulfil all clauses")

    @property
    def m(self) -> int:
        return len(self.clauses)

    def clause_array(self) -> np.ndarray:
        """Clauses as an (M, 3) integer array."""
        return np.array([c.members for c in self.clauses], dtype=np.int64).reshape(-1, 3)

    def permuted(self, perm: Sequence[int]) -> "ProblemInstance":
        """Relabel spin ``i`` as ``perm[i]``."""
        perm = list(perm)
        if sorted(perm) != list(range(self.n)):
            raise ValueError("perm must be a permutation of range(n)")
        clauses = [Clause(tuple(perm[i] for i in c)) for c in self.clauses]
        sol = None
        if self.solution is not None:
            spins = [0] * self.n
            for i, s in enumerate(self.solution):
                spins[perm[i]] = s
            sol = SpinConfiguration(tuple(spins))
        return ProblemInstance(self.n, tuple(clauses), sol, self.label)


def clause_cost(clause, config: SpinConfiguration) -> int:
    clause = _as_clause(clause)
    clause.check(len(config))
    a, b, c = clause.members
    return (config[a] + config[b] + config[c] - 1) ** 2


def total_cost(instance: ProblemInstance, config: SpinConfiguration) -> int:
    if len(config) != instance.n:
        raise DimensionError(f"config has {len(config)} spins, instance has {instance.n}")
    return sum(clause_cost(c, config) for c in instance.clauses)


def _up_count(k: np.ndarray, clause: Clause) -> np.ndarray:
    a, b, c = clause.members
    return ((k >> a) & 1) + ((k >> b) & 1) + ((k >> c) & 1)


def cost_vector(instance: ProblemInstance) -> np.ndarray:
    """Total cost of every configuration, indexed by its packed integer."""
    if instance.n > MAX_ENUM_N:
        raise CapacityError(f"n={instance.n} exceeds enumeration cap {MAX_ENUM_N}")
    k = np.arange(1 << instance.n, dtype=np.int64)
    cost = np.zeros(k.shape, dtype=np.int64)
    for c in instance.clauses:
        # sum of spins is 2*ups - 3, so the clause cost is 4*(ups - 2)^2
        cost += 4 * (_up_count(k, c) - 2) ** 2
    return cost


def _fulfilling(candidates: np.ndarray, clause: Clause) -> np.ndarray:
    return candidates[_up_count(candidates, clause) == 2]


def _zero_cost_configs(n: int, clauses: Sequence[Clause]) -> np.ndarray:
    dtype = np.uint32 if n <= 32 else np.uint64
    chunk = 1 << min(n, _CHUNK_BITS)
    found = []
    for start in range(0, 1 << n, chunk):
        cand = np.arange(start, start + chunk, dtype=dtype)
        for c in clauses:
            cand = _fulfilling(cand, c)
            if cand.size == 0:
                break
        found.append(cand)
    return np.concatenate(found) if found else np.empty(0, dtype=dtype)


def enumerate_solutions(instance: ProblemInstance) -> list[SpinConfiguration]:
    """All zero-cost configurations, in ascending packed order."""
    if instance.n > MAX_ENUM_N:
        raise CapacityError(f"n={instance.n} exceeds enumeration cap {MAX_ENUM_N}")
    ks = _zero_cost_configs(instance.n, instance.clauses)
    return [SpinConfiguration.from_int(int(k), instance.n) for k in ks]


def count_solutions(instance: ProblemInstance) -> int:
    if instance.n > MAX_ENUM_N:
        raise CapacityError(f"n={instance.n} exceeds enumeration cap {MAX_ENUM_N}")
    return int(_zero_cost_configs(instance.n, instance.clauses).size)


def generate_instance(
    n: int, seed, max_restarts: int = 10_000, label: str | None = None
) -> ProblemInstance:
    """Random exact-cover instance with exactly one satisfying configuration.

    Distinct clauses are drawn uniformly from those not yet used and added
    one at a time. The instance is returned as soon as the satisfying set
    has exactly one member; if it becomes empty, or every possible clause
    is used while several solutions remain, generation starts over.
    """
    if not 3 <= n <= MAX_ENUM_N:
        raise CapacityError(f"n must satisfy 3 <= n <= {MAX_ENUM_N}, got {n}")
    rng = np.random.default_rng(seed)
    all_clauses = [Clause(t) for t in itertools.combinations(range(n), 3)]
    assert len(all_clauses) == comb(n, 3)
    for _ in range(max_restarts + 1):
        pool = list(all_clauses)
        chosen: list[Clause] = []
        cand = None
        while pool:
            j = int(rng.integers(len(pool)))
            pool[j], pool[-1] = pool[-1], pool[j]
            clause = pool.pop()
            chosen.append(clause)
            cand = (
                _zero_cost_configs(n, chosen)
                if cand is None
                else _fulfilling(cand, clause)
            )
            if cand.size == 0:
                break
            if cand.size == 1:
                sol = SpinConfiguration.from_int(int(cand[0]), n)
                return ProblemInstance(n, tuple(chosen), sol, label)
    raise GenerationError(
        f"no unique-solution instance for n={n} within {max_restarts} restarts"
    )


def validate_instance(instance: ProblemInstance) -> None:
    """Raise InstanceValidationError unless the instance has exactly one
    zero-cost configuration equal to its stored solution (n <= 26)."""
    if instance.n > ORACLE_CHECK_N:
        return
    sols = enumerate_solutions(instance)
    if len(sols) != 1:
        raise InstanceValidationError(f"expected 1 satisfying configuration, found {len(sols)}")
    if instance.solution is not None and sols[0] != instance.solution:
        raise InstanceValidationError("stored solution differs from the oracle's")


# -- file format ------------------------------------------------------------

def instance_to_dict(instance: ProblemInstance) -> dict:
    doc: dict = {"n": instance.n, "clauses": [list(c.members) for c in instance.clauses]}
    if instance.solution is not None:
        doc["solution"] = list(instance.solution.spins)
    if instance.label is not None:
        doc["label"] = instance.label
    return doc


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def instance_from_dict(doc, source: str = "<document>") -> ProblemInstance:
    if not isinstance(doc, dict):
        raise InstanceParseError(f"{source}: top level must be an object")
    unknown = set(doc) - {"n", "clauses", "solution", "label"}
    if unknown:
        raise InstanceParseError(f"{source}: unknown field(s) {sorted(unknown)}")
    if "n" not in doc or not _is_int(doc["n"]):
        raise InstanceParseError(f"{source}: field 'n' must be an integer")
    raw = doc.get("clauses")
    if not isinstance(raw, list):
        raise InstanceParseError(f"{source}: field 'clauses' must be a list")
    for i, c in enumerate(raw):
        if not (isinstance(c, list) and len(c) == 3 and all(_is_int(x) for x in c)):
            raise InstanceParseError(f"{source}: clauses[{i}] must be a list of 3 integers, got {c!r}")
    sol = doc.get("solution")
    if sol is not None:
        if not (isinstance(sol, list) and all(_is_int(x) and x in (1, -1) for x in sol)):
            raise InstanceParseError(f"{source}: field 'solution' must be a list of +1/-1")
        sol = SpinConfiguration(tuple(sol))
    label = doc.get("label")
    if label is not None and not isinstance(label, str):
        raise InstanceParseError(f"{source}: field 'label' must be a string")
    try:
        return ProblemInstance(doc["n"], tuple(Clause(tuple(c)) for c in raw), sol, label)
    except InvalidClauseError as exc:
        raise InstanceValidationError(f"{source}: {exc}") from exc
    except InstanceValidationError as exc:
        raise InstanceValidationError(f"{source}: {exc}") from exc


def save_instance(instance: ProblemInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=1) + "\n")


def load_instance(path) -> ProblemInstance:
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return instance_from_dict(doc, str(path))


def instance_filename(n: int, alpha: int) -> str:
    return f"inst_{n}_{alpha}.json"
