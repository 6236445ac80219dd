"""Counter-based random substreams.

Every stochastic component draws from a `numpy` Generator backed by Philox,
keyed by a root seed plus a path of labels.  Distinct paths give statistically
independent streams, and the mapping (seed, path) -> stream is stable across
runs and platforms, which is what makes seeded experiments reproducible.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _mix(h: int, v: int) -> int:
    # splitmix64 finalizer; good avalanche for key derivation
    h = (h + (v & _MASK64) + 0x9E3779B97F4A7C15) & _MASK64
    h ^= h >> 30
    h = (h * 0xBF58476D1CE4E5B9) & _MASK64
    h ^= h >> 27
    h = (h * 0x94D049BB133111EB) & _MASK64
    h ^= h >> 31
    return h


def _fold(h: int, part) -> int:
    if isinstance(part, (int, np.integer)):
        return _mix(h, int(part))
    if isinstance(part, str):
        h = _mix(h, len(part))
        for b in part.encode("utf-8"):
            h = _mix(h, b)
        return h
    raise TypeError(f"substream path parts must be int or str, got {type(part)!r}")


def substream(seed: int, *path) -> np.random.Generator:
    """Generator for the substream identified by ``(seed, *path)``."""
    h = _fold(0x243F6A8885A308D3, int(seed))
    for part in path:
        h = _fold(h, part)
    key = (h << 64) | _mix(h, 0x5851F42D4C957F2D)
    return np.random.Generator(np.random.Philox(key=key))
