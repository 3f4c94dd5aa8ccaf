"""Deterministic RNG derivation.

Every stochastic component draws from a generator seeded by hashing a
(base seed, purpose, ...) tuple, so results never depend on call order
and are stable across platforms and processes.
"""

import hashlib

import numpy as np


def derive_seed(*parts):
    h = hashlib.sha256()
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "little")


def rng_for(*parts):
    return np.random.default_rng(derive_seed(*parts))
