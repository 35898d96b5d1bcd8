"""Dust-cloud optics: extinction, Beer-Lambert transmittance and backscatter.

Clouds are bounded volumes of identical spherical particles. A beam crossing
a cloud is attenuated with the geometric-optics extinction coefficient
``alpha = N * Q_ext * pi * r**2`` and may be scattered back once; the scatter
depth is drawn by inverting the accumulated optical depth (free-path
sampling), so the caller supplies the uniform variate and this module stays
stateless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .scene import Box, Ellipsoid, Shape


@dataclass(frozen=True)
class DustCloud:
    id: int
    shape: Shape
    number_density: float
    particle_radius: float
    extinction_efficiency: float = 2.0
    backscatter_albedo: float = 0.5

    def __post_init__(self):
        if not isinstance(self.shape, (Box, Ellipsoid)):
            raise TypeError("cloud shape must be a Box or an Ellipsoid")
        if not self.number_density >= 0.0:
            raise ValueError(f"number_density must be >= 0, got {self.number_density}")
        if not self.particle_radius > 0.0:
            raise ValueError(f"particle_radius must be > 0, got {self.particle_radius}")
        if not self.extinction_efficiency > 0.0:
            raise ValueError(f"extinction_efficiency must be > 0, got {self.extinction_efficiency}")
        if not 0.0 <= self.backscatter_albedo <= 1.0:
            raise ValueError(f"backscatter_albedo must be in [0, 1], got {self.backscatter_albedo}")

    @property
    def alpha(self) -> float:
        return extinction_coefficient(self)

    def with_density(self, number_density: float) -> "DustCloud":
        return replace(self, number_density=float(number_density))

    def translated(self, offset) -> "DustCloud":
        return replace(self, shape=self.shape.translated(offset))


@dataclass(frozen=True)
class ScatterEvent:
    cloud_id: int
    t_scatter: float
    d_pre: float
    # optical depth accumulated before the event; None means alpha * d_pre
    tau_pre: Optional[float] = None


def extinction_coefficient(cloud: DustCloud) -> float:
    """Extinction coefficient in 1/m."""
    r = cloud.particle_radius
    return cloud.number_density * cloud.extinction_efficiency * math.pi * r * r


def optical_depth(segments: Sequence[Tuple[float, float]]) -> float:
    tau = 0.0
    for alpha, length in segments:
        if alpha < 0.0 or length < 0.0:
            raise ValueError("extinction coefficients and lengths must be >= 0")
        tau += alpha * length
    return tau


def transmittance(segments: Sequence[Tuple[float, float]]) -> float:
    """One-way Beer-Lambert transmittance over ``(alpha, length)`` pieces."""
    return math.exp(-optical_depth(segments))


def merge_overlaps(segments: Sequence[Tuple[int, float, float, float]]) -> List[Tuple[int, float, float, float]]:
    """Split overlapping ``(cloud_id, t_in, t_out, alpha)`` intervals into
    disjoint pieces with summed alpha.

    Each piece is attributed to the covering cloud with the largest alpha
    (lowest id on ties); that cloud's albedo is used if the beam scatters
    there.
    """
    segs = [s for s in segments if s[2] > s[1]]
    if len(segs) <= 1:
        return list(segs)
    cuts = sorted({t for s in segs for t in (s[1], s[2])})
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (a + b)
        cover = [s for s in segs if s[1] <= mid < s[2]]
        if not cover:
            continue
        alpha = sum(s[3] for s in cover)
        owner = min(cover, key=lambda s: (-s[3], s[0]))[0]
        out.append((owner, a, b, alpha))
    return out


def sample_scatter(segments: Sequence[Tuple[int, float, float, float]], u: float) -> Optional[ScatterEvent]:
    """First-interaction scatter along disjoint, sorted in-cloud segments.

    ``u`` in (0, 1) fixes the target optical depth ``-ln(u)``; ``None`` means
    the beam leaves the last segment unscattered.
    """
    if not 0.0 < u < 1.0:
        raise ValueError(f"u must lie in (0, 1), got {u}")
    target = -math.log(u)
    tau = 0.0
    depth = 0.0
    for cloud_id, t_in, t_out, alpha in segments:
        length = t_out - t_in
        seg_tau = alpha * length
        if alpha > 0.0 and target < tau + seg_tau:
            dt = (target - tau) / alpha
            return ScatterEvent(cloud_id, t_in + dt, depth + dt, target)
        tau += seg_tau
        depth += length
    return None


def dust_return_intensity(event: ScatterEvent, cloud: DustCloud, calib) -> float:
    """Backscatter intensity of a scatter event, before detection.

    Forward attenuation is already encoded in the sampling distribution, so
    only the return trip through the traversed dust is applied here.
    """
    if event.t_scatter <= 0.0:
        raise ValueError("t_scatter must be > 0")
    tau = extinction_coefficient(cloud) * event.d_pre if event.tau_pre is None else event.tau_pre
    return calib.K * cloud.backscatter_albedo * math.exp(-tau) / event.t_scatter ** 2


# ---------------------------------------------------------------------------
# batched free-path sampling
# ---------------------------------------------------------------------------

@dataclass
class ScatterBatch:
    scattered: np.ndarray  # bool
    t_scatter: np.ndarray
    d_pre: np.ndarray
    tau_pre: np.ndarray
    cloud_index: np.ndarray  # index into the cloud list, -1 if none
    tau_total: np.ndarray


def sample_scatter_batch(t_in: np.ndarray, t_out: np.ndarray, alphas: Sequence[float], u: np.ndarray) -> ScatterBatch:
    """Vectorized :func:`sample_scatter` with overlap merging built in.

    ``t_in``/``t_out`` have shape ``(n_rays, n_clouds)`` and are already
    clipped; an empty interval has ``t_out <= t_in``.
    """
    n, nc = t_in.shape
    alphas = np.asarray(alphas, dtype=float)
    target = -np.log(u)
    if nc == 0:
        z = np.zeros(n)
        return ScatterBatch(np.zeros(n, bool), z, z.copy(), z.copy(), np.full(n, -1), z.copy())
    valid = t_out > t_in
    if nc == 1:
        length = np.where(valid[:, 0], t_out[:, 0] - t_in[:, 0], 0.0)
        a = alphas[0]
        tau_total = a * length
        scattered = target < tau_total
        if a > 0.0:
            dt = np.where(scattered, target / a, 0.0)
        else:
            dt = np.zeros(n)
        t_s = np.where(scattered, t_in[:, 0] + dt, np.nan)
        return ScatterBatch(
            scattered,
            t_s,
            np.where(scattered, dt, np.nan),
            np.where(scattered, target, np.nan),
            np.where(scattered, 0, -1),
            tau_total,
        )

    lo = np.where(valid, t_in, 0.0)
    hi = np.where(valid, t_out, 0.0)
    cuts = np.sort(np.concatenate([lo, hi], axis=1), axis=1)
    a, b = cuts[:, :-1], cuts[:, 1:]
    mid = 0.5 * (a + b)
    # cover[i, k, c]: sub-interval k of ray i lies inside cloud c
    cover = (lo[:, None, :] <= mid[:, :, None]) & (mid[:, :, None] < hi[:, None, :]) & (b > a)[:, :, None]
    weighted = np.where(cover, alphas[None, None, :], -1.0)
    alpha_k = np.where(cover, alphas[None, None, :], 0.0).sum(axis=2)
    owner_k = np.argmax(weighted, axis=2)
    length_k = b - a
    tau_k = alpha_k * length_k
    cum = np.cumsum(tau_k, axis=1)
    tau_total = cum[:, -1].copy()
    reached = (target[:, None] < cum) & (alpha_k > 0.0)
    scattered = reached.any(axis=1)
    k = np.argmax(reached, axis=1)
    rows = np.arange(n)
    before = np.where(k > 0, cum[rows, k - 1], 0.0)
    before[k == 0] = 0.0
    ak = alpha_k[rows, k]
    dt = np.divide(target - before, ak, out=np.zeros(n), where=scattered)
    covered_len = np.where(cover.any(axis=2), length_k, 0.0)
    depth_before = np.cumsum(covered_len, axis=1) - covered_len
    t_s = np.where(scattered, a[rows, k] + dt, np.nan)
    return ScatterBatch(
        scattered,
        t_s,
        np.where(scattered, depth_before[rows, k] + dt, np.nan),
        np.where(scattered, target, np.nan),
        np.where(scattered, owner_k[rows, k], -1),
        tau_total,
    )
