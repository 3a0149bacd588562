"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .bias import hamming_distance, make_bias
from .engine import build_diagonal, dump_state, evolve, sample_indices, success_probability
from .errors import QASError
from .exact_cover import (
    cost_vector,
    generate_instance,
    instance_filename,
    load_instance,
    save_instance,
    validate_instance,
)
from .harness import (
    ExperimentConfig,
    instance_seed,
    iterative_annealing,
    problem_model,
    run_experiment,
    run_id,
)
from .ising import encode_ising, model_to_dict, rescale
from .seeds import derive_seed

log = logging.getLogger("qasbias")

THREADS_ENV = "QASBIAS_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n\n{self.format_usage()}")


def parse_sizes(text: str) -> list[int]:
    """``8..14`` (inclusive, step 2), ``8..14:1`` (explicit step) or ``8,10,12``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, _, rest = part.partition("..")
            hi, _, step = rest.partition(":")
            out.extend(range(int(lo), int(hi) + 1, int(step) if step else 2))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty size list {text!r}")
    return out


def parse_distances(text: str) -> list[int | None]:
    out = []
    for part in text.split(","):
        part = part.strip().lower()
        if part == "none":
            out.append(None)
        elif ".." in part:
            lo, _, hi = part.partition("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def parse_floats(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _add_physics_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--b", dest="bias_strength", type=float, help="bias strength on the rescaled scale (default 1)")
    p.add_argument("--schedule", help="'default' (bundled table), 'linear', or a path to an s,A,B csv")
    p.add_argument("--a-max", type=float, help="linear schedule driver scale A(0) in GHz")
    p.add_argument("--b-max", type=float, help="linear schedule problem scale B(1) in GHz")
    p.add_argument("--joint-scaling", action="store_const", const=True, default=None,
                   help="rescale problem and bias together into the hardware box")
    p.add_argument("--bias-with", choices=["problem", "driver"],
                   help="envelope the bias follows (default: problem)")
    p.add_argument("--driver-sign", type=int, choices=[-1, 1], help="sign of the transverse driver (default -1)")
    p.add_argument("--max-phase", type=float, help="step bound max(A,B)*dt in rad (default 0.05)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qasbias", description="Biased quantum annealing sampling on exact-cover instances.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("generate", help="write unique-solution instances")
    g.add_argument("--n", type=int, required=True, help="number of spins")
    g.add_argument("--count", type=_positive_int, default=1, help="number of instances (alpha = 1..count)")
    g.add_argument("--seed", type=int, default=0, help="master seed (same derivation as sweep)")
    g.add_argument("--out-dir", required=True, help="directory for inst_<N>_<alpha>.json files")
    g.add_argument("--max-restarts", type=int, default=10_000)

    e = sub.add_parser("encode", help="export the Ising form of an instance")
    e.add_argument("instance", help="instance file")
    e.add_argument("--no-rescale", action="store_true", help="keep integer coefficients")
    e.add_argument("--out", help="output file (default stdout)")

    a = sub.add_parser("anneal", help="anneal a single instance")
    a.add_argument("instance", help="instance file")
    a.add_argument("--tau", type=float, default=1.0, help="anneal time in microseconds")
    a.add_argument("--d", default="none", help="Hamming distance of the bias, or 'none'")
    a.add_argument("--shots", type=int, default=30, help="number of anneals to sample (0: exact only)")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--dump-state", help="write the final state vector (index re im) here")
    _add_physics_flags(a)

    s = sub.add_parser("sweep", help="run an ensemble sweep and write CSV tables")
    s.add_argument("--config", help="JSON config or run manifest; flags override it")
    s.add_argument("--sizes", type=parse_sizes, help="e.g. 8..14 (step 2), 8..14:1, or 8,10")
    s.add_argument("--instances", dest="instances_per_size", type=_positive_int, help="instances per size")
    s.add_argument("--anneals", type=_positive_int, help="shots per cell (default 30)")
    s.add_argument("--tau", dest="taus", type=parse_floats, help="comma list of anneal times in us")
    s.add_argument("--distances", type=parse_distances, help="e.g. none,0,1,2,3")
    s.add_argument("--seed", type=int, help="master seed")
    s.add_argument("--mode", choices=["exact", "shots"])
    s.add_argument("--threads", type=_positive_int, help=f"worker threads (env {THREADS_ENV})")
    s.add_argument("--instance-dir", help="load inst_<N>_<alpha>.json from here instead of generating")
    s.add_argument("--out", help="results CSV path; siblings <stem>_aggregate.csv etc. are written next to it")
    s.add_argument("--out-dir", help="directory for results.csv, aggregate.csv, scatter.csv, manifest.json")
    _add_physics_flags(s)

    it = sub.add_parser("iterate", help="iterative biased annealing")
    src = it.add_mutually_exclusive_group(required=True)
    src.add_argument("--instance", help="instance file")
    src.add_argument("--n", type=int, help="generate instances of this size")
    it.add_argument("--count", type=_positive_int, default=1, help="instances to generate with --n")
    it.add_argument("--rounds", type=_positive_int, default=5)
    it.add_argument("--tau", type=float, default=1.0)
    it.add_argument("--anneals", type=_positive_int, default=30)
    it.add_argument("--seed", type=int, default=0)
    it.add_argument("--pick", choices=["lowest", "last"], default="lowest",
                    help="shot used as next bias when --no-carry-best is set")
    it.add_argument("--no-carry-best", action="store_true", help="bias from the latest round only")
    it.add_argument("--out", help="trace CSV (default stdout)")
    _add_physics_flags(it)

    v = sub.add_parser("validate", help="check instance files with the brute-force oracle")
    v.add_argument("paths", nargs="+", help="instance files or directories")
    return parser


_OVERRIDES = ("sizes", "instances_per_size", "anneals", "taus", "distances", "seed", "mode", "threads",
              "instance_dir", "bias_strength", "schedule", "a_max", "b_max", "joint_scaling", "bias_with",
              "driver_sign", "max_phase")


def effective_config(args) -> ExperimentConfig:
    doc: dict = {}
    if os.environ.get(THREADS_ENV):
        doc["threads"] = int(os.environ[THREADS_ENV])
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError(f"config {args.config} must be a JSON object")
        if isinstance(loaded.get("config"), dict):
            loaded = loaded["config"]  # a run manifest
        doc.update(loaded)
    for name in _OVERRIDES:
        val = getattr(args, name, None)
        if val is not None:
            doc[name] = val
    try:
        return ExperimentConfig.from_dict(doc)
    except (TypeError, QASError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


def _physics_config(args, **extra) -> ExperimentConfig:
    doc = {k: getattr(args, k) for k in ("bias_strength", "schedule", "a_max", "b_max", "joint_scaling",
                                         "bias_with", "driver_sign", "max_phase") if getattr(args, k, None) is not None}
    doc.update(extra)
    try:
        return ExperimentConfig(**doc)
    except QASError as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


def _load_instances(directory: str, cfg: ExperimentConfig) -> dict:
    out = {}
    for n in cfg.sizes:
        for alpha in range(1, cfg.instances_per_size + 1):
            path = Path(directory) / instance_filename(n, alpha)
            if path.exists():
                out[(n, alpha)] = load_instance(path)
    return out


def cmd_generate(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for alpha in range(1, args.count + 1):
        inst = generate_instance(args.n, instance_seed(args.seed, args.n, alpha), args.max_restarts,
                                 label=f"(N,alpha)=({args.n},{alpha})")
        save_instance(inst, out / instance_filename(args.n, alpha))
        log.info("wrote %s (M=%d)", instance_filename(args.n, alpha), inst.m)
    return 0


def cmd_encode(args) -> int:
    model = encode_ising(load_instance(args.instance))
    if not args.no_rescale:
        model, _ = rescale(model)
    text = json.dumps(model_to_dict(model), indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_anneal(args) -> int:
    inst = load_instance(args.instance)
    if inst.solution is None:
        raise UsageError("instance has no stored solution; run validate first")
    d = None if str(args.d).lower() == "none" else int(args.d)
    cfg = _physics_config(args, sizes=[inst.n], taus=[args.tau], distances=[d], seed=args.seed)
    model = problem_model(inst)
    bias = None
    if d is not None:
        bias = make_bias(inst.solution, d, cfg.bias_strength, derive_seed(args.seed, "bias", d))
    diag = build_diagonal(model, bias)
    state = evolve(diag, cfg.make_schedule(args.tau), driver_sign=cfg.driver_sign,
                   bias_with=cfg.bias_with, max_phase=cfg.max_phase)
    costs = cost_vector(inst)
    probs = state.probabilities()
    report = {
        "n": inst.n, "m": inst.m, "d": d, "tau_us": args.tau, "b": cfg.bias_strength if d is not None else 0.0,
        "schedule_id": cfg.make_schedule(args.tau).id,
        "p_exact": success_probability(state, inst.solution),
        "mean_cost_exact": float(np.dot(probs / probs.sum(), costs)),
        "norm_error": state.norm_error(),
    }
    if bias is not None:
        report["bias"] = bias.to_dict()
        report["hamming_distance"] = hamming_distance(bias, inst.solution)
    if args.shots > 0:
        shots = sample_indices(state, args.shots, derive_seed(args.seed, "shots", d, args.tau))
        report["shots"] = [int(k) for k in shots]
        report["success_count"] = int(np.count_nonzero(shots == inst.solution.to_int()))
        report["mean_cost_shots"] = float(costs[shots].mean())
    if args.dump_state:
        dump_state(state, args.dump_state)
    sys.stdout.write(json.dumps(report, indent=1) + "\n")
    return 0


def sweep_paths(args, cfg: ExperimentConfig) -> dict[str, Path]:
    names = ("results", "aggregate", "scatter", "enhancement", "manifest")
    if args.out:
        res = Path(args.out)
        stem = res.with_suffix("")
        paths = {name: Path(f"{stem}_{name}.csv") for name in names}
        paths["results"] = res
        paths["manifest"] = Path(f"{stem}_manifest.json")
        return paths
    base = Path(args.out_dir) if args.out_dir else Path("out") / run_id(cfg)
    paths = {name: base / f"{name}.csv" for name in names}
    paths["manifest"] = base / "manifest.json"
    return paths


def cmd_sweep(args) -> int:
    cfg = effective_config(args)
    instances = _load_instances(cfg.instance_dir, cfg) if cfg.instance_dir else None

    def progress(done, total):
        log.info("progress %d/%d instances", done, total)

    table = run_experiment(cfg, instances, progress=progress)
    paths = sweep_paths(args, cfg)
    for p in paths.values():
        p.parent.mkdir(parents=True, exist_ok=True)
    paths["results"].write_text(table.results_csv())
    paths["aggregate"].write_text(table.aggregate_csv())
    paths["scatter"].write_text(table.scatter_csv())
    paths["enhancement"].write_text(table.enhancement_csv())
    paths["manifest"].write_text(json.dumps(table.manifest(), indent=1) + "\n")
    log.info("wrote %s", paths["results"])
    if table.partial:
        log.error("some cells failed; see the error column of %s", paths["results"])
        return 2
    return 0


def cmd_iterate(args) -> int:
    cfg = _physics_config(args, sizes=[args.n or 3], taus=[args.tau], anneals=args.anneals,
                          seed=args.seed, mode="shots", distances=[None])
    if args.instance:
        jobs = [(1, load_instance(args.instance))]
    else:
        jobs = [(alpha, generate_instance(args.n, instance_seed(args.seed, args.n, alpha)))
                for alpha in range(1, args.count + 1)]
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "round", "bias_source", "round_best", "round_best_cost", "best_cost", "success"])
        for alpha, inst in jobs:
            trace = iterative_annealing(inst, cfg, args.rounds, seed=derive_seed(args.seed, "iterate", alpha),
                                        carry_best=not args.no_carry_best, pick=args.pick)
            for r in trace.rounds:
                src = "" if r.bias_source is None else r.bias_source.to_int()
                w.writerow([alpha, r.round, src, r.round_best.to_int(), r.round_best_cost, r.best_cost, int(r.success)])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def _instance_files(paths) -> list[Path]:
    out = []
    for p in map(Path, paths):
        out.extend(sorted(p.glob("*.json")) if p.is_dir() else [p])
    return out


def cmd_validate(args) -> int:
    files = _instance_files(args.paths)
    if not files:
        log.error("no instance files found")
        return 2
    bad = 0
    for path in files:
        try:
            validate_instance(load_instance(path))
            print(f"ok {path}")
        except (QASError, OSError) as exc:
            bad += 1
            print(f"FAIL {path}: {exc}")
    log.info("%d/%d instances valid", len(files) - bad, len(files))
    return 0 if bad == 0 else 2


COMMANDS = {
    "generate": cmd_generate,
    "encode": cmd_encode,
    "anneal": cmd_anneal,
    "sweep": cmd_sweep,
    "iterate": cmd_iterate,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (QASError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
