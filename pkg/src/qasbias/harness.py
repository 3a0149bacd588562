"""Ensemble sweeps, statistics and the iterative bias scheme."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import platform
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .bias import BiasField, bias_from_sample, make_bias
from .engine import (
    DEFAULT_MAX_PHASE,
    build_diagonal,
    evolve,
    sample_indices,
)
from .errors import ModeError, ParameterError
from .exact_cover import ProblemInstance, SpinConfiguration, cost_vector, generate_instance
from .ising import IsingModel, encode_ising, rescale
from .schedule import Schedule
from .seeds import derive_seed

log = logging.getLogger(__name__)

MODES = ("exact", "shots")


@dataclass
class ExperimentConfig:
    sizes: list[int] = field(default_factory=lambda: [8])
    instances_per_size: int = 100
    anneals: int = 30
    taus: list[float] = field(default_factory=lambda: [1.0, 15.0])
    distances: list[int | None] = field(default_factory=lambda: [None, 0, 1, 2, 3])
    bias_strength: float = 1.0
    schedule: str = "default"  # "default" | "linear" | path to an s,A,B csv
    a_max: float = 6.0  # linear schedule only
    b_max: float = 12.0
    seed: int = 0
    mode: str = "shots"
    joint_scaling: bool = False
    bias_with: str = "problem"
    driver_sign: int = -1
    max_phase: float = DEFAULT_MAX_PHASE
    threads: int = 1
    instance_dir: str | None = None

    def __post_init__(self):
        self.sizes = [int(n) for n in self.sizes]
        self.taus = [float(t) for t in self.taus]
        self.distances = [None if d is None else int(d) for d in self.distances]
        self.validate()

    def validate(self) -> None:
        if not self.sizes:
            raise ParameterError("sizes must not be empty")
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.anneals < 1:
            raise ParameterError("anneals must be >= 1")
        if self.instances_per_size < 1:
            raise ParameterError("instances_per_size must be >= 1")
        ds = [d for d in self.distances if d is not None]
        if any(d < 0 for d in ds) or (ds and max(ds) >= min(self.sizes)):
            raise ParameterError("every distance must satisfy 0 <= d < min(sizes)")
        if ds and not self.bias_strength > 0:
            raise ParameterError("bias_strength must be positive")
        if any(t < 0 for t in self.taus):
            raise ParameterError("taus must be non-negative")

    def make_schedule(self, tau: float | None = None) -> Schedule:
        tau = self.taus[0] if tau is None else tau
        if self.schedule == "default":
            return Schedule.default(tau)
        if self.schedule == "linear":
            return Schedule.linear(self.a_max, self.b_max, tau)
        return Schedule.from_csv(self.schedule, tau)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if "config" in doc and isinstance(doc["config"], dict):
            doc = doc["config"]  # a run manifest
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ParameterError(f"unknown config field(s): {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True)
class ResultRecord:
    n: int
    alpha: int
    d: int | None
    tau: float
    b: float
    mode: str
    anneals: int
    m: int
    success_count: int | None
    p: float
    mean_cost: float
    cost_per_clause: float
    seed: int
    bias_seed: int | None = None
    shot_seed: int | None = None
    error: str | None = None

    @property
    def cell(self) -> tuple:
        return (self.n, _dkey(self.d), self.tau)


def _dkey(d):
    return -1 if d is None else d


def _fmt_d(d) -> str:
    return "none" if d is None else str(d)


RESULT_COLUMNS = ["n", "alpha", "d", "tau_us", "b", "mode", "anneals", "success_count",
                  "p", "mean_cost", "cost_per_clause", "seed", "m", "bias_seed", "shot_seed", "error"]
AGGREGATE_COLUMNS = ["n", "d", "tau_us", "p_mean", "p_sem", "cost_mean", "cost_sem",
                     "solved_count", "count", "cost_per_clause_mean", "cost_per_clause_sem"]


# -- statistics -------------------------------------------------------------

@dataclass(frozen=True)
class CellAggregate:
    n: int
    d: int | None
    tau: float
    count: int
    p_mean: float | None
    p_sem: float | None
    cost_mean: float | None
    cost_sem: float | None
    cpc_mean: float | None
    cpc_sem: float | None
    solved_count: int | None

    @property
    def missing(self) -> bool:
        return self.count == 0


def mean_sem(values: Sequence[float]) -> tuple[float | None, float | None]:
    """Arithmetic mean and s/sqrt(m) (sample std, m - 1 denominator)."""
    m = len(values)
    if m == 0:
        return None, None
    mean = math.fsum(values) / m
    if m == 1:
        return mean, None
    var = math.fsum((v - mean) ** 2 for v in values) / (m - 1)
    return mean, math.sqrt(var / m)


def aggregate(records: Iterable[ResultRecord]) -> list[CellAggregate]:
    """Per-(n, d, tau) ensemble means; failed records leave a missing cell."""
    groups: dict[tuple, list[ResultRecord]] = {}
    for r in records:
        groups.setdefault(r.cell, []).append(r)
    out = []
    for key in sorted(groups):
        rs = groups[key]
        ok = [r for r in rs if r.error is None]
        p = mean_sem([r.p for r in ok])
        c = mean_sem([r.mean_cost for r in ok])
        cpc = mean_sem([r.cost_per_clause for r in ok])
        solved = None
        if ok and all(r.mode == "shots" for r in ok):
            solved = solved_instance_count(ok)
        out.append(CellAggregate(rs[0].n, rs[0].d, rs[0].tau, len(ok), *p, *c, *cpc, solved))
    return out


@dataclass(frozen=True)
class Enhancement:
    value: float | None
    error: float | None
    unbounded: bool = False

    def __str__(self) -> str:
        if self.unbounded:
            return "unbounded"
        if self.error is None:
            return f"{self.value:.4g}"
        return f"{self.value:.4g} +/- {self.error:.2g}"


def enhancement_factor(biased: CellAggregate, unbiased: CellAggregate) -> Enhancement:
    """Ratio of mean success probabilities with first-order error propagation."""
    if biased.missing or unbiased.missing:
        raise ParameterError("enhancement factor needs two non-missing cells")
    pb, pu = biased.p_mean, unbiased.p_mean
    if pu == 0:
        return Enhancement(None, None, unbounded=True)
    ratio = pb / pu
    if biased.p_sem is None or unbiased.p_sem is None:
        return Enhancement(ratio, None)
    rel_b = biased.p_sem / pb if pb else 0.0
    err = abs(ratio) * math.hypot(rel_b, unbiased.p_sem / pu)
    if pb == 0:
        err = biased.p_sem / pu
    return Enhancement(ratio, err)


def solved_instance_count(records: Iterable[ResultRecord], min_successes: int = 1) -> int:
    """Number of instances with at least ``min_successes`` successful shots."""
    solved = set()
    for r in records:
        if r.mode != "shots":
            raise ModeError("solved-instance counts need shot-mode records")
        if r.error is None and r.success_count >= min_successes:
            solved.add((r.n, r.alpha))
    return len(solved)


@dataclass(frozen=True)
class Scatter:
    pairs: list[tuple[int, int, float, float]]  # (n, alpha, p_unbiased, p_biased)
    improved: int
    skipped: int


def per_instance_scatter(records: Iterable[ResultRecord], d: int, tau: float, n: int | None = None) -> Scatter:
    unb: dict[tuple, float] = {}
    bia: dict[tuple, float] = {}
    for r in records:
        if r.error is not None or r.tau != tau or (n is not None and r.n != n):
            continue
        if r.d is None:
            unb[(r.n, r.alpha)] = r.p
        elif r.d == d:
            bia[(r.n, r.alpha)] = r.p
    keys = sorted(set(unb) & set(bia))
    skipped = len(set(unb) ^ set(bia))
    if skipped:
        log.warning("scatter d=%s tau=%s: %d instance(s) without a pair skipped", d, tau, skipped)
    if not keys:
        log.warning("scatter d=%s tau=%s: no paired instances", d, tau)
    pairs = [(k[0], k[1], unb[k], bia[k]) for k in keys]
    return Scatter(pairs, sum(1 for *_, pu, pb in pairs if pb > pu), skipped)


def time_to_solution(p: float, tau_us: float, overhead_us: float = 0.0, confidence: float = 0.99) -> float:
    """Expected time (us) to see the target once with the given confidence.

    ``overhead_us`` is a user-supplied per-anneal constant (programming,
    readout); it is never measured here.
    """
    if p <= 0:
        return math.inf
    if p >= 1:
        return tau_us + overhead_us
    repeats = math.log(1 - confidence) / math.log(1 - p)
    return repeats * (tau_us + overhead_us)


# -- sweep ------------------------------------------------------------------

def instance_seed(master: int, n: int, alpha: int) -> int:
    return derive_seed(master, "instance", n, alpha)


def bias_seed(inst_seed: int, d) -> int:
    return derive_seed(inst_seed, "bias", d)


def shot_seed(inst_seed: int, d, tau: float) -> int:
    return derive_seed(inst_seed, "shots", d, tau)


def problem_model(instance: ProblemInstance) -> IsingModel:
    model, _ = rescale(encode_ising(instance))
    return model


def cell_bias(config: ExperimentConfig, instance: ProblemInstance, model: IsingModel, d, seed) -> tuple[IsingModel, BiasField | None]:
    """Bias for one cell and the model it is paired with.

    The bias strength is on the scale of the rescaled problem; with joint
    scaling the pair is shrunk (or stretched) together to fit the box.
    """
    if d is None:
        return model, None
    bias = make_bias(instance.solution, d, config.bias_strength, seed)
    if config.joint_scaling:
        model, k = rescale(model, extra_fields=[-m for m in bias.mu])
        bias = bias.scaled(k)
    return model, bias


class ExperimentRunner:
    """Runs every (n, alpha, d, tau) cell of a config."""

    def __init__(self, config: ExperimentConfig, instances: dict[tuple[int, int], ProblemInstance] | None = None,
                 backend: str = "auto", progress=None):
        self.config = config
        self.instances = instances or {}
        self.backend = backend
        self.progress = progress
        self._lock = threading.Lock()
        self._done = 0

    def instance(self, n: int, alpha: int) -> ProblemInstance:
        if (n, alpha) in self.instances:
            return self.instances[(n, alpha)]
        return generate_instance(n, instance_seed(self.config.seed, n, alpha), label=f"(N,alpha)=({n},{alpha})")

    def run_instance(self, n: int, alpha: int) -> list[ResultRecord]:
        cfg = self.config
        iseed = instance_seed(cfg.seed, n, alpha)
        try:
            inst = self.instance(n, alpha)
            if inst.solution is None:
                raise ParameterError(f"instance ({n},{alpha}) has no stored solution")
            base = problem_model(inst)
            costs = cost_vector(inst)
            target = inst.solution.to_int()
        except Exception as exc:  # recorded, the sweep carries on
            return [self._failed(n, alpha, d, tau, iseed, exc) for d in cfg.distances for tau in cfg.taus]
        out = []
        for d in cfg.distances:
            bseed = bias_seed(iseed, d) if d is not None else None
            try:
                model, bias = cell_bias(cfg, inst, base, d, bseed)
                diag = build_diagonal(model, bias)
            except Exception as exc:
                out.extend(self._failed(n, alpha, d, tau, iseed, exc, inst.m) for tau in cfg.taus)
                continue
            for tau in cfg.taus:
                try:
                    out.append(self._run_cell(inst, diag, costs, target, n, alpha, d, tau, iseed, bseed))
                except Exception as exc:
                    out.append(self._failed(n, alpha, d, tau, iseed, exc, inst.m))
        self._tick()
        return out

    def _run_cell(self, inst, diag, costs, target, n, alpha, d, tau, iseed, bseed) -> ResultRecord:
        cfg = self.config
        sched = cfg.make_schedule(tau)
        state = evolve(diag, sched, driver_sign=cfg.driver_sign, bias_with=cfg.bias_with,
                       backend=self.backend, max_phase=cfg.max_phase)
        m = max(inst.m, 1)
        if cfg.mode == "exact":
            probs = state.probabilities()
            probs = probs / probs.sum()
            p = float(probs[target])
            mean_cost = float(np.dot(probs, costs))
            count, sseed = None, None
        else:
            sseed = shot_seed(iseed, d, tau)
            shots = sample_indices(state, cfg.anneals, sseed)
            count = int(np.count_nonzero(shots == target))
            p = count / cfg.anneals
            mean_cost = float(costs[shots].mean())
        return ResultRecord(n, alpha, d, tau, cfg.bias_strength if d is not None else 0.0, cfg.mode,
                            cfg.anneals, inst.m, count, p, mean_cost, mean_cost / m, iseed, bseed, sseed)

    def _failed(self, n, alpha, d, tau, iseed, exc, m=0) -> ResultRecord:
        log.error("cell n=%d alpha=%d d=%s tau=%g failed: %s", n, alpha, d, tau, exc)
        cfg = self.config
        return ResultRecord(n, alpha, d, tau, cfg.bias_strength if d is not None else 0.0, cfg.mode,
                            cfg.anneals, m, None, math.nan, math.nan, math.nan, iseed,
                            error=f"{type(exc).__name__}: {exc}")

    def _tick(self):
        cfg = self.config
        total = len(cfg.sizes) * cfg.instances_per_size
        with self._lock:
            self._done += 1
            done = self._done
        if self.progress is not None:
            self.progress(done, total)
        log.info("instances done: %d/%d", done, total)

    def run(self) -> "ResultTable":
        cfg = self.config
        jobs = [(n, a) for n in cfg.sizes for a in range(1, cfg.instances_per_size + 1)]
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                chunks = list(pool.map(lambda job: self.run_instance(*job), jobs))
        else:
            chunks = [self.run_instance(*job) for job in jobs]
        records = sorted((r for c in chunks for r in c), key=lambda r: (r.n, r.alpha, _dkey(r.d), r.tau))
        return ResultTable(cfg, records)


def run_experiment(config: ExperimentConfig, instances=None, backend: str = "auto", progress=None) -> "ResultTable":
    return ExperimentRunner(config, instances, backend, progress).run()


# -- result table and exports ----------------------------------------------

def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


@dataclass
class ResultTable:
    config: ExperimentConfig
    records: list[ResultRecord]

    @property
    def partial(self) -> bool:
        return any(r.error is not None for r in self.records)

    def aggregates(self) -> list[CellAggregate]:
        return aggregate(self.records)

    def cell(self, n: int, d, tau: float) -> CellAggregate:
        for a in self.aggregates():
            if a.n == n and a.d == d and a.tau == tau:
                return a
        raise KeyError((n, d, tau))

    def enhancements(self) -> list[tuple[int, int, float, Enhancement]]:
        aggs = {(a.n, _dkey(a.d), a.tau): a for a in self.aggregates()}
        out = []
        for (n, dk, tau), a in sorted(aggs.items()):
            base = aggs.get((n, -1, tau))
            if dk < 0 or base is None or a.missing or base.missing:
                continue
            out.append((n, dk, tau, enhancement_factor(a, base)))
        return out

    def results_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in self.records:
            w.writerow([r.n, r.alpha, _fmt_d(r.d), _num(r.tau), _num(r.b), r.mode, r.anneals,
                        _num(r.success_count), _num(r.p), _num(r.mean_cost), _num(r.cost_per_clause),
                        r.seed, r.m, _num(r.bias_seed), _num(r.shot_seed), r.error or ""])
        return buf.getvalue()

    def aggregate_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(AGGREGATE_COLUMNS)
        for a in self.aggregates():
            w.writerow([a.n, _fmt_d(a.d), _num(a.tau), _num(a.p_mean), _num(a.p_sem), _num(a.cost_mean),
                        _num(a.cost_sem), _num(a.solved_count), a.count, _num(a.cpc_mean), _num(a.cpc_sem)])
        return buf.getvalue()

    def scatter_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "tau_us", "d", "alpha", "p_unbiased", "p_biased"])
        if None in self.config.distances:
            for tau in self.config.taus:
                for d in self.config.distances:
                    if d is None:
                        continue
                    for n, alpha, pu, pb in per_instance_scatter(self.records, d, tau).pairs:
                        w.writerow([n, _num(tau), d, alpha, _num(pu), _num(pb)])
        return buf.getvalue()

    def enhancement_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "d", "tau_us", "enhancement", "enhancement_err"])
        for n, d, tau, e in self.enhancements():
            w.writerow([n, d, _num(tau), "unbounded" if e.unbounded else _num(e.value), _num(e.error)])
        return buf.getvalue()

    def manifest(self, backend: str = "auto") -> dict:
        return run_manifest(self.config, backend, partial=self.partial)

    def write(self, out_dir, backend: str = "auto") -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.csv").write_text(self.results_csv())
        (out / "aggregate.csv").write_text(self.aggregate_csv())
        (out / "scatter.csv").write_text(self.scatter_csv())
        (out / "enhancement.csv").write_text(self.enhancement_csv())
        (out / "manifest.json").write_text(json.dumps(self.manifest(backend), indent=1) + "\n")
        return out


def _versions() -> dict:
    import numpy
    try:
        import numba
        nb = numba.__version__
    except ImportError:  # pragma: no cover
        nb = None
    return {"qasbias": __version__, "python": platform.python_version(), "numpy": numpy.__version__, "numba": nb}


def run_id(config: ExperimentConfig) -> str:
    import hashlib
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def run_manifest(config: ExperimentConfig, backend: str = "auto", **extra) -> dict:
    sched = config.make_schedule()
    return {
        "run_id": run_id(config),
        "config": config.to_dict(),
        "schedule_id": sched.id,
        "schedule_csv": sched.to_csv(),
        "engine": {
            "backend": backend,
            "integrator": "strang-midpoint",
            "max_phase_rad": config.max_phase,
            "driver_sign": config.driver_sign,
            "bias_with": config.bias_with,
            "precision": "complex128",
        },
        "versions": _versions(),
        **extra,
    }


# -- iterative scheme -------------------------------------------------------

@dataclass(frozen=True)
class RoundRecord:
    round: int
    bias_source: SpinConfiguration | None
    round_best: SpinConfiguration
    round_best_cost: int
    best_cost: int
    success: bool


@dataclass(frozen=True)
class IterativeTrace:
    rounds: list[RoundRecord]

    @property
    def solved(self) -> bool:
        return any(r.success for r in self.rounds)

    @property
    def best_costs(self) -> list[int]:
        return [r.best_cost for r in self.rounds]

    def solved_by(self, round_index: int) -> bool:
        return any(r.success for r in self.rounds[: round_index + 1])


def iterative_annealing(instance: ProblemInstance, config: ExperimentConfig, max_rounds: int,
                        tau: float | None = None, seed: int | None = None, carry_best: bool = True,
                        pick: str = "lowest", backend: str = "auto") -> IterativeTrace:
    """Re-anneal with the previous outcome as the bias until a zero-cost shot.

    Round 0 is unbiased. Each round samples ``config.anneals`` shots;
    ``pick`` selects the lowest-cost shot (ties to the smallest packed
    index) or the last shot as the next bias source. With ``carry_best``
    the source is the best configuration seen in any round so far.
    """
    if max_rounds < 1:
        raise ParameterError("max_rounds must be >= 1")
    if config.mode != "shots":
        raise ModeError("iterative annealing needs shot mode")
    if pick not in ("lowest", "last"):
        raise ParameterError("pick must be 'lowest' or 'last'")
    tau = config.taus[0] if tau is None else tau
    seed = config.seed if seed is None else seed
    sched = config.make_schedule(tau)
    model = problem_model(instance)
    costs = cost_vector(instance)
    source: SpinConfiguration | None = None
    best_k, best_c = None, None
    rounds = []
    for rnd in range(max_rounds):
        bias = None if source is None else bias_from_sample(source, config.bias_strength)
        diag = build_diagonal(model, bias)
        state = evolve(diag, sched, driver_sign=config.driver_sign, bias_with=config.bias_with,
                       backend=backend, max_phase=config.max_phase)
        shots = sample_indices(state, config.anneals, derive_seed(seed, "iterate", rnd))
        shot_costs = costs[shots]
        low = int(shot_costs.min())
        k_low = int(shots[shot_costs == low].min())
        if best_c is None or low < best_c or (low == best_c and k_low < best_k):
            best_k, best_c = k_low, low
        success = low == 0
        rounds.append(RoundRecord(rnd, source, SpinConfiguration.from_int(k_low, instance.n), low,
                                  best_c, success))
        if success:
            break
        if carry_best:
            nxt = best_k
        else:
            nxt = k_low if pick == "lowest" else int(shots[-1])
        source = SpinConfiguration.from_int(nxt, instance.n)
    return IterativeTrace(rounds)
