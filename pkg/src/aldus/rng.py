"""Counter-based random numbers keyed by beam identity.

Each variate is a pure hash of ``(seed, frame_id, channel, azimuth_index,
draw_index)``, so a beam sees the same draws no matter which worker evaluates
it or in which order. The mixer is the SplitMix64 finalizer applied once per
key word; numpy ``uint64`` arithmetic wraps modulo 2**64 as required.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_MASK64 = (1 << 64) - 1

# draw slots per beam; fixed so keys never shift between branches
DRAW_SCATTER = 0
DRAW_RANGE_NOISE = 1


def _mix(x: np.ndarray) -> np.ndarray:
    x = x + _GOLDEN
    x = (x ^ (x >> _S30)) * _M1
    x = (x ^ (x >> _S27)) * _M2
    return x ^ (x >> _S31)


def hash_keys(seed: int, frame_id: int, channel, azimuth_index, draw_index) -> np.ndarray:
    """64-bit hashes for broadcastable key arrays."""
    ch = np.asarray(channel, dtype=np.uint64)
    az = np.asarray(azimuth_index, dtype=np.uint64)
    dr = np.asarray(draw_index, dtype=np.uint64)
    h = _mix(np.full(np.broadcast(ch, az, dr).shape, int(seed) & _MASK64, dtype=np.uint64))
    h = _mix(h ^ np.uint64(int(frame_id) & _MASK64))
    h = _mix(h ^ ((ch << np.uint64(32)) | az))
    return _mix(h ^ dr)


def uniform(seed: int, frame_id: int, channel, azimuth_index, draw_index) -> np.ndarray:
    """Uniform variates on the open interval (0, 1) with 53-bit resolution."""
    h = hash_keys(seed, frame_id, channel, azimuth_index, draw_index)
    return ((h >> _S11).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def normal(seed: int, frame_id: int, channel, azimuth_index, draw_index) -> np.ndarray:
    """Standard normal variates by inverse-CDF transform of one uniform."""
    return ndtri(uniform(seed, frame_id, channel, azimuth_index, draw_index))


@dataclass(frozen=True)
class RngStream:
    """Draws for a single beam."""

    seed: int
    frame_id: int
    channel: int
    azimuth_index: int

    def uniform(self, draw_index: int) -> float:
        return float(uniform(self.seed, self.frame_id, [self.channel], [self.azimuth_index], draw_index)[0])

    def normal(self, draw_index: int) -> float:
        return float(normal(self.seed, self.frame_id, [self.channel], [self.azimuth_index], draw_index)[0])
