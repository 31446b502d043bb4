"""Seed handling: one master seed, named substreams per purpose and replicate."""

from __future__ import annotations

import zlib

import numpy as np


def stream_key(name: str) -> int:
    """Stable 32-bit id for a stream name (independent of PYTHONHASHSEED)."""
    return zlib.crc32(name.encode("utf-8"))


def substream(seed: int, name: str, *indices: int) -> np.random.SeedSequence:
    """Seed sequence for stream ``name`` at ``indices`` under master ``seed``."""
    key = (stream_key(name),) + tuple(int(i) for i in indices)
    return np.random.SeedSequence(int(seed), spawn_key=key)


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.default_rng(seed)
