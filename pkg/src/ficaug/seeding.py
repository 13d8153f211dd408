"""Stable fan-out of one root seed into per-stage, per-node and per-fold seeds."""

import hashlib

import numpy as np


def derive_seed(seed, *keys):
    """Return a 63-bit seed derived from ``seed`` and an arbitrary key path.

    Keys may be ints or strings; the mapping is stable across processes and
    Python versions (no reliance on the salted builtin ``hash``).
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(repr(int(seed)).encode())
    for key in keys:
        h.update(b"\x1f")
        h.update(repr(key).encode())
    return int.from_bytes(h.digest(), "little") >> 1


def rng_for(seed, *keys):
    return np.random.default_rng(derive_seed(seed, *keys))
