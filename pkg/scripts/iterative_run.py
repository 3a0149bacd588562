"""Fraction of instances solved after each round of iterative biased annealing.

    python3 scripts/iterative_run.py --n 10 --instances 20 --rounds 5 --tau 0.0002
"""

import argparse

from qasbias.exact_cover import generate_instance
from qasbias.harness import ExperimentConfig, instance_seed, iterative_annealing


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--rounds", type=int, default=5)
    ap.add_argument("--tau", type=float, default=0.0002)
    ap.add_argument("--anneals", type=int, default=30)
    ap.add_argument("--b", type=float, default=1.0)
    ap.add_argument("--pick", choices=["lowest", "last"], default="lowest")
    ap.add_argument("--no-carry-best", action="store_true")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = ExperimentConfig(sizes=[args.n], taus=[args.tau], distances=[None], anneals=args.anneals,
                           bias_strength=args.b, seed=args.seed)
    traces = []
    for alpha in range(1, args.instances + 1):
        inst = generate_instance(args.n, instance_seed(args.seed, args.n, alpha))
        traces.append(iterative_annealing(inst, cfg, args.rounds, seed=alpha,
                                          carry_best=not args.no_carry_best, pick=args.pick))
    print("round  solved_fraction")
    for r in range(args.rounds):
        frac = sum(t.solved_by(r) for t in traces) / len(traces)
        print(f"{r:>5}  {frac:.3f}")


if __name__ == "__main__":
    main()
