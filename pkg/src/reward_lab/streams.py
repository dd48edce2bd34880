"""Counter-based random streams.

Every draw is a pure function of (seed, index tuple, draw number), so a
rollout's randomness does not depend on which worker produced it or in what
order. The mixer is SplitMix64's finaliser applied along the index chain.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_UNIT = 2.0**-53


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def hash_indices(seed: int, *indices) -> np.ndarray:
    """64-bit hash of ``seed`` and the broadcast index arrays."""
    with np.errstate(over="ignore"):
        h = _mix(np.asarray(seed, dtype=np.uint64) + _GOLDEN)
        for idx in indices:
            h = _mix(h ^ (np.asarray(idx, dtype=np.int64).astype(np.uint64) * _GOLDEN + _GOLDEN))
    return h


def uniforms(seed: int, *indices, draws: int) -> np.ndarray:
    """Uniforms in the open interval (0, 1), shape ``broadcast(indices) + (draws,)``."""
    base = hash_indices(seed, *indices)[..., None]
    with np.errstate(over="ignore"):
        h = _mix(base ^ (np.arange(draws, dtype=np.uint64) * _M2 + _GOLDEN))
    return ((h >> _S11).astype(np.float64) + 0.5) * _UNIT


def normals(u: np.ndarray) -> np.ndarray:
    """Standard normals from uniforms by inverse CDF."""
    return ndtri(u)
