"""Seed splitting.

One integer seed fans out into independent streams keyed by tags::

    stream(seed, *tags) = Generator(PCG64(SeedSequence([seed, t1, t2, ...])))

String tags enter as their CRC-32, integers as themselves, so
``stream(7, "mission", 3, "plan", 12)`` is stable across runs, platforms
and process boundaries.
"""
from __future__ import annotations

import zlib

import numpy as np


def _tag(t) -> int:
    if isinstance(t, str):
        return zlib.crc32(t.encode("utf-8"))
    t = int(t)
    if t < 0:
        raise ValueError(f"seed tags must be non-negative, got {t}")
    return t


def stream(seed: int, *tags) -> np.random.Generator:
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *map(_tag, tags)])))


def sub_seed(seed: int, *tags) -> int:
    """A 63-bit integer seed derived from ``(seed, *tags)``."""
    return int(stream(seed, *tags).integers(0, 2 ** 63 - 1))
