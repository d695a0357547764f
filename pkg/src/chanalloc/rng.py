"""Labeled, independent RNG substreams derived from one master seed.

Every source of randomness in the toolkit (placement, channel counts,
fading, tie-breaks, per-algorithm draws) gets its own named substream so
that changing how one consumer draws can never perturb another.
"""
from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def substream(seed: int, label: str, *indices: int) -> np.random.Generator:
    """Return a generator for the (label, *indices) substream of `seed`.

    The label is hashed with CRC-32 (stable across platforms and runs);
    extra integer indices select e.g. a per-tenant child stream.
    """
    entropy = [int(seed) & _MASK64, zlib.crc32(label.encode("utf-8"))]
    entropy.extend(int(i) & _MASK64 for i in indices)
    return np.random.default_rng(np.random.SeedSequence(entropy))
