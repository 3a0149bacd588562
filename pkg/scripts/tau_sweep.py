"""Mean success probability as a function of the anneal time.

    python3 scripts/tau_sweep.py --n 10 --instances 20 --taus 0.0005,0.001,0.002,0.005,0.015
"""

import argparse
from pathlib import Path

from qasbias.cli import parse_distances, parse_floats
from qasbias.harness import ExperimentConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--taus", type=parse_floats, default=[0.0005, 0.001, 0.002, 0.005, 0.015])
    ap.add_argument("--distances", type=parse_distances, default=[None, 0, 1, 2, 3])
    ap.add_argument("--schedule", default="default")
    ap.add_argument("--bias-with", choices=["problem", "driver"], default="problem")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-dir", default="out/tau_sweep")
    args = ap.parse_args()

    cfg = ExperimentConfig(sizes=[args.n], instances_per_size=args.instances, taus=args.taus,
                           distances=args.distances, mode="exact", schedule=args.schedule,
                           bias_with=args.bias_with, seed=args.seed)
    table = run_experiment(cfg)
    table.write(Path(args.out_dir))

    labels = ["none" if d is None else f"d={d}" for d in args.distances]
    print("tau_us    " + "".join(f"{s:>9}" for s in labels))
    for tau in args.taus:
        row = [table.cell(args.n, d, tau).p_mean for d in args.distances]
        print(f"{tau:<10g}" + "".join(f"{p:9.4f}" for p in row))


if __name__ == "__main__":
    main()
