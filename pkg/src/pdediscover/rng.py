"""Seedable random number streams shared by every stochastic stage.

All randomness in this package flows through Philox4x64 counter-based
generators.  Philox streams are fully specified by their 64-bit key, so a
run is reproducible from its seed alone, on any platform, and independent
streams for pipeline stages are obtained by hashing a stage label into the
key rather than by drawing from a parent stream.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["make_rng", "derive_seed"]


def make_rng(seed: int) -> np.random.Generator:
    """Return a Generator backed by Philox4x64 keyed with `seed`."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))


def derive_seed(seed: int, label: str) -> int:
    """Derive a child seed for a named stage, stable across runs.

    CRC32 of the label is folded into the parent seed so distinct stages
    ("noise", "sample", "net", ...) get decorrelated Philox keys without
    consuming state from any shared stream.
    """
    tag = zlib.crc32(label.encode("utf-8"))
    return (seed * 0x9E3779B97F4A7C15 + tag) & 0xFFFFFFFFFFFFFFFF
