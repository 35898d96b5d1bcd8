"""Frame statistics and parameter sweeps.

Dust depth is recomputed from geometry: the in-cloud distance travelled by a
dust return's beam before its reported range.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .medium import DustCloud
from .scene import Box, Ellipsoid, RayBatch, SceneObject, shape_interval_batch
from .sim import KIND_DUST, KIND_TARGET, Frame, simulate_frame

DEPTH_BINS = 10
SWEEP_PARAMS = ("density", "cloud_front_distance")
SWEEP_COLUMNS = (
    "param", "value", "replicate", "object_id", "return_count", "mean_intensity",
    "dust_count", "dust_mean_intensity", "dropped",
)


class IntegrityError(ValueError):
    pass


@dataclass
class DustStats:
    count: int = 0
    mean_intensity: float = 0.0
    depth_histogram: np.ndarray = field(default_factory=lambda: np.zeros(DEPTH_BINS, np.int64))
    depth_edges: np.ndarray = field(default_factory=lambda: np.zeros(DEPTH_BINS + 1))
    depths: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass
class FrameMetrics:
    per_object: Dict[int, Tuple[int, float]]
    dust: DustStats
    dropped_count: int

    @property
    def target_count(self) -> int:
        return sum(c for c, _ in self.per_object.values())


def _beam_dirs(frame: Frame, idx: np.ndarray) -> np.ndarray:
    d = frame.points[idx] - frame.origin
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def in_cloud_depth(frame: Frame, clouds: Sequence[DustCloud]) -> Tuple[np.ndarray, np.ndarray]:
    """For each dust return: ``(depth_before_range, chord_length)`` in its cloud.

    ``chord_length`` is the cloud's full chord along the beam, used to size
    the histogram when no explicit depth range is given.
    """
    idx = np.flatnonzero(frame.kind == KIND_DUST)
    depth = np.zeros(idx.size)
    chord = np.zeros(idx.size)
    if idx.size == 0:
        return depth, chord
    rays = RayBatch(frame.origin, _beam_dirs(frame, idx))
    r = frame.range[idx]
    by_id = {c.id: c for c in clouds}
    for j, cid in enumerate(frame.source_id[idx]):
        if cid not in by_id:
            raise IntegrityError(f"dust return references unknown cloud id {cid}")
    for cloud in clouds:
        a, b = shape_interval_batch(rays, cloud.shape)
        a = np.maximum(a, 0.0)
        inside = b > a
        depth += np.where(inside, np.clip(np.minimum(r, b) - a, 0.0, None), 0.0)
        mine = frame.source_id[idx] == cloud.id
        chord = np.where(mine & inside, b - a, chord)
    return depth, chord


def compute_metrics(
    frame: Frame,
    scene: Sequence[SceneObject],
    clouds: Sequence[DustCloud],
    depth_max: Optional[float] = None,
) -> FrameMetrics:
    known = {o.id for o in scene}
    tgt = frame.kind == KIND_TARGET
    ids, counts = np.unique(frame.source_id[tgt], return_counts=True)
    unknown = sorted(set(ids.tolist()) - known)
    if unknown:
        raise IntegrityError(f"frame references unknown object id(s) {unknown}")
    per_object = {}
    for oid in sorted(known):
        sel = tgt & (frame.source_id == oid)
        n = int(sel.sum())
        per_object[oid] = (n, float(frame.intensity[sel].mean()) if n else 0.0)

    dust_sel = frame.kind == KIND_DUST
    n_dust = int(dust_sel.sum())
    depths, chords = in_cloud_depth(frame, clouds)
    if depth_max is None:
        depth_max = float(chords.max()) if n_dust else 1.0
    edges = np.linspace(0.0, depth_max, DEPTH_BINS + 1)
    hist = np.histogram(np.clip(depths, 0.0, depth_max), bins=edges)[0] if n_dust else np.zeros(DEPTH_BINS, np.int64)
    dust = DustStats(
        count=n_dust,
        mean_intensity=float(frame.intensity[dust_sel].mean()) if n_dust else 0.0,
        depth_histogram=hist.astype(np.int64),
        depth_edges=edges,
        depths=depths,
    )
    return FrameMetrics(per_object, dust, frame.dropped_count)


def forward_extent(shape, direction) -> float:
    """Half-width of ``shape`` along unit ``direction``."""
    d = np.asarray(direction, float)
    if isinstance(shape, Box):
        return float(np.abs(d) @ np.asarray(shape.half_extents))
    if isinstance(shape, Ellipsoid):
        return float(np.linalg.norm(d * np.asarray(shape.semi_axes)))
    raise TypeError(type(shape).__name__)


def cloud_front_distance(cloud: DustCloud, pose) -> float:
    yaw = math.radians(pose.yaw_deg)
    f = np.array([math.cos(yaw), math.sin(yaw), 0.0])
    center = np.asarray(cloud.shape.center) - np.asarray(pose.position)
    return float(center @ f) - forward_extent(cloud.shape, f)


def with_parameter(config, parameter: str, value: float):
    """Copy of ``config`` with every cloud's density or front distance set."""
    if parameter not in SWEEP_PARAMS:
        raise ValueError(f"parameter {parameter!r} is not sweepable; choose from {list(SWEEP_PARAMS)}")
    if parameter == "density":
        if value < 0:
            raise ValueError("density values must be >= 0")
        clouds = tuple(c.with_density(value) for c in config.clouds)
    else:
        yaw = math.radians(config.pose.yaw_deg)
        f = np.array([math.cos(yaw), math.sin(yaw), 0.0])
        clouds = tuple(c.translated((value - cloud_front_distance(c, config.pose)) * f) for c in config.clouds)
    return config.evolve(clouds=clouds)


@dataclass
class SweepRow:
    param: str
    value: float
    replicate: int
    object_id: int
    return_count: int
    mean_intensity: float
    dust_count: int
    dust_mean_intensity: float
    dropped: int


def sweep(config, parameter: str, values: Sequence[float], replicates: int = 1, workers: Optional[int] = 1) -> List[SweepRow]:
    """One row per (value, replicate, scene object); replicate ``k`` uses seed ``config.seed + k``.

    Scenes without objects still get one row per (value, replicate) with
    ``object_id = -1``.
    """
    if not values:
        raise ValueError("sweep values must be non-empty")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    rows = []
    for value in values:
        cfg = with_parameter(config, parameter, float(value))
        for rep in range(replicates):
            rcfg = cfg.evolve(seed=(config.seed + rep) % 2**64)
            frame = simulate_frame(rcfg, 0, workers)
            m = compute_metrics(frame, rcfg.scene, rcfg.clouds)
            objects = m.per_object.items() or [(-1, (0, 0.0))]
            for oid, (count, mean_i) in objects:
                rows.append(SweepRow(parameter, float(value), rep, oid, count, mean_i, m.dust.count, m.dust.mean_intensity, m.dropped_count))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([
            r.param, f"{r.value:.6g}", r.replicate, r.object_id, r.return_count,
            f"{r.mean_intensity:.6g}", r.dust_count, f"{r.dust_mean_intensity:.6g}", r.dropped,
        ])
    return buf.getvalue()
