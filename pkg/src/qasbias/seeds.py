"""Counter-based seed derivation (splitmix64 mixing).

Every cell of a sweep gets its seed from the master seed and the cell's
coordinates, so any single cell can be replayed in isolation.
"""

import hashlib

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def _key(k) -> int:
    if k is None:
        k = "none"
    if isinstance(k, bool) or not isinstance(k, int):
        return int.from_bytes(hashlib.blake2b(repr(k).encode(), digest_size=8).digest(), "little")
    return k & MASK64


def derive_seed(parent: int, *keys) -> int:
    h = splitmix64(parent & MASK64)
    for k in keys:
        h = splitmix64(h ^ _key(k))
    return h
