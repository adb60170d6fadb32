"""Reproducible randomness: keyed streams plus counter-based pair draws.

Sequential sampling (vertex counts, positions, weights, proposals) uses
numpy's Philox keyed by (seed, stream_id); distinct stream ids give
independent streams.  Edge indicators instead come from a stateless
counter-based hash of (key, i, j), so any iteration order over vertex
pairs, and any partitioning of the pair loop across workers, produces
bit-identical graphs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RngStream", "pair_uniform", "TAG_VERTICES", "TAG_EDGES", "TAG_PLANT", "TAG_MC"]

_MASK64 = (1 << 64) - 1

TAG_VERTICES = 0x56455254
TAG_EDGES = 0x45444745
TAG_PLANT = 0x504C4E54
TAG_MC = 0x4D435231


def _splitmix64_int(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class RngStream:
    """A (seed, stream_id) pair naming one reproducible random stream."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.Generator(
            np.random.Philox(key=[self.seed & _MASK64, self.stream_id & _MASK64])
        )

    def child(self, tag: int, index: int = 0) -> "RngStream":
        """Derived independent stream for a sub-purpose of this one."""
        mixed = _splitmix64_int(self.stream_id ^ _splitmix64_int(tag ^ (index << 20)))
        return RngStream(seed=self.seed, stream_id=mixed)

    def pair_key(self, tag: int) -> int:
        """64-bit key feeding the counter-based per-pair hash."""
        return _splitmix64_int(self.seed ^ _splitmix64_int(self.stream_id ^ tag))


def pair_uniform(key: int, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Uniform [0,1) variate for each unordered vertex pair.

    A pure function of (key, min(i,j), max(i,j)); the same pair always
    receives the same variate, independent of evaluation order or of
    how the pair loop is partitioned.  Indices must fit in 32 bits.
    """
    i = np.asarray(i, dtype=np.uint64)
    j = np.asarray(j, dtype=np.uint64)
    lo = np.minimum(i, j)
    hi = np.maximum(i, j)
    with np.errstate(over="ignore"):
        z = (lo << np.uint64(32)) ^ hi
        z ^= np.uint64(key & _MASK64)
        z = z + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z ^= z >> np.uint64(31)
    return (z >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
