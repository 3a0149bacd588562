"""Biased quantum annealing sampling on exact-cover instances, simulated
with exact state-vector dynamics."""

__version__ = "0.1.0"
