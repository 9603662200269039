"""Seed derivation.

Every random draw in the package comes from a Philox (counter-based) stream
keyed by ``SeedSequence(seed, spawn_key=key)``.  The key is a tuple of
non-negative integers; string labels are mapped through CRC32 so that e.g.
``stream(7, "poisson")`` and ``stream(7, "thin")`` never share a stream.
Replicate ``i`` of a run with seed ``s`` uses ``stream(s, label, i)``, which
makes replicates reproducible independently of how they are scheduled.
"""
from __future__ import annotations

import os
import zlib

import numpy as np

SEED_ENV = "IDFIELDS_SEED"
_MASK64 = (1 << 64) - 1


def _key_part(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf8"))
    part = int(part)
    if part < 0:
        raise ValueError(f"stream key parts must be non-negative, got {part}")
    return part


def normalize_seed(seed) -> int:
    if seed is None:
        seed = default_seed()
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed}")
    return seed & _MASK64


def stream(seed, *key) -> np.random.Generator:
    ss = np.random.SeedSequence(normalize_seed(seed), spawn_key=tuple(_key_part(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed, *key) -> int:
    """A 64-bit child seed, for handing to APIs that take an integer seed."""
    ss = np.random.SeedSequence(normalize_seed(seed), spawn_key=tuple(_key_part(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def default_seed() -> int:
    return int(os.environ.get(SEED_ENV, "0"))
