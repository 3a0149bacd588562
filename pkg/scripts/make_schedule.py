"""Write the bundled stand-in annealing schedule table.

The curve is a smooth monotone crossover with A(0) = 6 GHz and B(1) = 12 GHz,
shaped after published DW2000Q-style envelopes (crossover near s ~ 0.3).

    python scripts/make_schedule.py src/qasbias/data/dw2000q_like.csv
"""

import sys

import numpy as np


def envelopes(s):
    a = 6.0 * (1.0 - s) ** 2 * np.exp(-2.5 * s)
    b = 0.05 + 11.95 * s**2
    return a, b


def main(path):
    s = np.linspace(0.0, 1.0, 101)
    a, b = envelopes(s)
    with open(path, "w") as fh:
        fh.write("s,A,B\n")
        for row in zip(s, a, b):
            fh.write("{:.2f},{:.8f},{:.8f}\n".format(*row))


if __name__ == "__main__":
    main(sys.argv[1])
