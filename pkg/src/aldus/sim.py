"""Frame engine: scene + dust medium + sensor -> per-beam returns.

Beams are traced in numpy batches. Every beam consumes exactly two
counter-based draws (scatter, range noise), keyed by its identity, so frames
are bit-identical regardless of how the batch is split across workers.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, List, Optional, Sequence

import numpy as np

from . import rng
from .medium import DustCloud, extinction_coefficient, sample_scatter_batch
from .scene import Ray, RayBatch, SceneObject, nearest_hit_batch, shape_interval_batch
from .sensor import SensorModel, beam_angles, beam_directions, detect_batch

KIND_TARGET = 0
KIND_DUST = 1
KIND_NAMES = ("target", "dust")


@dataclass(frozen=True)
class LidarReturn:
    channel: int
    azimuth_deg: float
    range: float
    intensity: int
    kind: str  # "target" or "dust"
    source_id: int  # object id for targets, cloud id for dust
    point: tuple
    elevation_deg: float = 0.0
    azimuth_index: int = 0


@dataclass
class Frame:
    """One revolution, stored column-wise (one array entry per return)."""

    frame_id: int
    sensor_name: str
    seed: int
    beam_count: int
    origin: np.ndarray
    channel: np.ndarray
    azimuth_index: np.ndarray
    azimuth_deg: np.ndarray
    elevation_deg: np.ndarray
    range: np.ndarray
    intensity: np.ndarray
    kind: np.ndarray
    source_id: np.ndarray
    points: np.ndarray

    def __len__(self) -> int:
        return int(self.range.shape[0])

    @property
    def dropped_count(self) -> int:
        return self.beam_count - len(self)

    @property
    def returns(self) -> List[LidarReturn]:
        return list(iter(self))

    def __iter__(self) -> Iterator[LidarReturn]:
        for i in range(len(self)):
            yield LidarReturn(
                channel=int(self.channel[i]),
                azimuth_deg=float(self.azimuth_deg[i]),
                range=float(self.range[i]),
                intensity=int(self.intensity[i]),
                kind=KIND_NAMES[self.kind[i]],
                source_id=int(self.source_id[i]),
                point=tuple(float(c) for c in self.points[i]),
                elevation_deg=float(self.elevation_deg[i]),
                azimuth_index=int(self.azimuth_index[i]),
            )

    @classmethod
    def empty(cls, frame_id=0, sensor_name="", seed=0, beam_count=0, origin=(0.0, 0.0, 0.0)) -> "Frame":
        return cls(
            frame_id, sensor_name, seed, beam_count, np.asarray(origin, float),
            np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0), np.zeros(0), np.zeros(0),
            np.zeros(0, np.uint8), np.zeros(0, np.uint8), np.zeros(0, np.int64), np.zeros((0, 3)),
        )


@dataclass
class BeamBatchResult:
    detected: np.ndarray
    range: np.ndarray
    intensity: np.ndarray
    kind: np.ndarray
    source_id: np.ndarray


def _cloud_intervals(rays: RayBatch, clouds: Sequence[DustCloud], max_t: np.ndarray):
    n = len(rays)
    t_in = np.empty((n, len(clouds)))
    t_out = np.empty((n, len(clouds)))
    for j, cloud in enumerate(clouds):
        a, b = shape_interval_batch(rays, cloud.shape)
        t_in[:, j] = np.maximum(a, 0.0)
        t_out[:, j] = np.minimum(b, max_t)
    return t_in, t_out


def _pick(mask, a, b):
    return np.where(mask, a, b)


def trace_batch(
    rays: RayBatch,
    channel: np.ndarray,
    azimuth_index: np.ndarray,
    scene: Sequence[SceneObject],
    clouds: Sequence[DustCloud],
    sensor: SensorModel,
    seed: int,
    frame_id: int,
) -> BeamBatchResult:
    """Simulate a batch of beams; clouds must be sorted by id."""
    n = len(rays)
    calib = sensor.calib
    hit_t, hit_id = nearest_hit_batch(rays, scene)
    has_hit = hit_id >= 0
    max_t = np.where(has_hit, hit_t, sensor.max_range)

    u = rng.uniform(seed, frame_id, channel, azimuth_index, rng.DRAW_SCATTER)
    z = rng.normal(seed, frame_id, channel, azimuth_index, rng.DRAW_RANGE_NOISE)

    t_in, t_out = _cloud_intervals(rays, clouds, max_t)
    alphas = [extinction_coefficient(c) for c in clouds]
    sc = sample_scatter_batch(t_in, t_out, alphas, u)

    # dust candidate
    albedo = np.array([c.backscatter_albedo for c in clouds] + [0.0])
    cloud_ids = np.array([c.id for c in clouds] + [-1], dtype=np.int64)
    t_s = np.where(sc.scattered, sc.t_scatter, 1.0)
    dust_i = np.where(
        sc.scattered,
        calib.K * albedo[sc.cloud_index] * np.exp(-np.where(sc.scattered, sc.tau_pre, 0.0)) / (t_s * t_s),
        0.0,
    )
    dust_ok, dust_r, dust_q = detect_batch(dust_i, np.where(sc.scattered, sc.t_scatter, np.inf), sensor, z)
    dust_ok &= sc.scattered

    # target candidate
    refl = {o.id: o.reflectivity for o in scene}
    rho = np.zeros(n)
    if has_hit.any():
        ids = np.fromiter(refl.keys(), dtype=np.int64)
        vals = np.fromiter(refl.values(), dtype=float)
        order = np.argsort(ids)
        pos = np.searchsorted(ids[order], hit_id[has_hit])
        rho[has_hit] = vals[order][pos]
    trans = np.exp(-sc.tau_total)
    r_hit = np.where(has_hit, hit_t, 1.0)
    tgt_i = np.where(has_hit, calib.K * rho * trans * trans / (r_hit * r_hit), 0.0)
    tgt_ok, tgt_r, tgt_q = detect_batch(tgt_i, np.where(has_hit, hit_t, np.inf), sensor, z)
    tgt_ok &= has_hit

    if sensor.return_mode == "first":
        use_dust = sc.scattered
        tgt_ok &= ~sc.scattered
    else:
        use_dust = dust_ok & (~tgt_ok | (dust_i > tgt_i))
        tgt_ok &= ~use_dust
    detected = (use_dust & dust_ok) | tgt_ok
    return BeamBatchResult(
        detected=detected,
        range=_pick(use_dust, dust_r, tgt_r),
        intensity=_pick(use_dust, dust_q, tgt_q).astype(np.uint8),
        kind=np.where(use_dust, KIND_DUST, KIND_TARGET).astype(np.uint8),
        source_id=np.where(use_dust, cloud_ids[sc.cloud_index], hit_id),
    )


@lru_cache(maxsize=16)
def _beam_geometry(sensor: SensorModel, yaw_deg: float):
    elev, azim = beam_angles(sensor, yaw_deg)
    dirs = beam_directions(sensor, yaw_deg)
    channel = np.repeat(np.arange(sensor.channels), sensor.azimuth_steps)
    az_idx = np.tile(np.arange(sensor.azimuth_steps), sensor.channels)
    for a in (elev, azim, dirs, channel, az_idx):
        a.setflags(write=False)
    return elev, np.mod(azim, 360.0), dirs, channel, az_idx


def resolve_workers(workers: Optional[int] = None) -> int:
    """``None`` reads ``ALDUS_THREADS``; 0 means one worker per CPU."""
    if workers is None:
        workers = int(os.environ.get("ALDUS_THREADS", "1") or 1)
    if workers < 0:
        raise ValueError("worker count must be >= 0")
    return workers or (os.cpu_count() or 1)


def _chunks(n: int, k: int) -> List[slice]:
    bounds = np.linspace(0, n, k + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def assemble_frame(frame_id, sensor_name, seed, beam_count, origin, idx, dirs, elev, azim, channel, az_idx, res) -> Frame:
    keep = np.flatnonzero(res.detected)
    sel = idx[keep]
    rng_ = res.range[keep]
    return Frame(
        frame_id=frame_id,
        sensor_name=sensor_name,
        seed=seed,
        beam_count=beam_count,
        origin=np.asarray(origin, float),
        channel=channel[sel].astype(np.int64),
        azimuth_index=az_idx[sel].astype(np.int64),
        azimuth_deg=azim[sel],
        elevation_deg=elev[sel],
        range=rng_,
        intensity=res.intensity[keep],
        kind=res.kind[keep],
        source_id=res.source_id[keep].astype(np.int64),
        points=np.asarray(origin, float) + rng_[:, None] * dirs[sel],
    )


def simulate_frame(config, frame_id: int = 0, workers: Optional[int] = 1) -> Frame:
    """Simulate one revolution for a validated scenario configuration."""
    sensor = config.sensor
    elev, azim, dirs, channel, az_idx = _beam_geometry(sensor, float(config.pose.yaw_deg))
    origin = np.asarray(config.pose.position, float)
    clouds = sorted(config.clouds, key=lambda c: c.id)
    n = dirs.shape[0]
    workers = resolve_workers(workers)

    def run(sl: slice) -> BeamBatchResult:
        return trace_batch(RayBatch(origin, dirs[sl]), channel[sl], az_idx[sl], config.scene, clouds, sensor, config.seed, frame_id)

    parts = _chunks(n, min(workers, n) if n else 1)
    if workers == 1 or len(parts) <= 1:
        results = [run(sl) for sl in parts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, parts))
    if results:
        res = BeamBatchResult(*(np.concatenate([getattr(r, f) for r in results]) for f in BeamBatchResult.__dataclass_fields__))
    else:
        res = BeamBatchResult(np.zeros(0, bool), np.zeros(0), np.zeros(0, np.uint8), np.zeros(0, np.uint8), np.zeros(0, np.int64))
    return assemble_frame(frame_id, sensor.name, config.seed, n, origin, np.arange(n), dirs, elev, azim, channel, az_idx, res)


def simulate_beam(ray: Ray, scene, clouds, sensor: SensorModel, stream: rng.RngStream) -> Optional[LidarReturn]:
    """Single-beam form of the engine, keyed by ``stream``."""
    rays = RayBatch(ray.origin, np.asarray([ray.direction]))
    ch = np.array([ray.channel])
    az = np.array([ray.azimuth_index])
    res = trace_batch(rays, ch, az, scene, sorted(clouds, key=lambda c: c.id), sensor, stream.seed, stream.frame_id)
    if not res.detected[0]:
        return None
    r = float(res.range[0])
    d = np.asarray(ray.direction)
    elev = float(np.degrees(np.arcsin(np.clip(d[2], -1.0, 1.0))))
    azim = float(np.mod(np.degrees(np.arctan2(d[1], d[0])), 360.0))
    return LidarReturn(
        channel=ray.channel,
        azimuth_deg=azim,
        range=r,
        intensity=int(res.intensity[0]),
        kind=KIND_NAMES[res.kind[0]],
        source_id=int(res.source_id[0]),
        point=tuple(float(c) for c in np.asarray(ray.origin) + r * d),
        elevation_deg=elev,
        azimuth_index=ray.azimuth_index,
    )


class SinkError(RuntimeError):
    def __init__(self, frame_id: int, cause: BaseException):
        super().__init__(f"sink failed while writing frame {frame_id}: {cause}")
        self.frame_id = frame_id


@dataclass
class RunSummary:
    frames: int
    rays: int
    seconds: float

    @property
    def frames_per_s(self) -> float:
        return self.frames / self.seconds if self.seconds > 0 else float("inf")

    @property
    def rays_per_s(self) -> float:
        return self.rays / self.seconds if self.seconds > 0 else float("inf")

    def __str__(self) -> str:
        return (
            f"{self.frames} frame(s), {self.rays} rays in {self.seconds:.3f} s: "
            f"{self.frames_per_s:.1f} frames/s, {self.rays_per_s:.0f} rays/s"
        )


def run_scenario(config, sink, workers: Optional[int] = 1) -> RunSummary:
    """Simulate ``config.frames`` frames in order and hand each to ``sink``.

    Timing covers simulation only, not the sink.
    """
    if config.frames < 1:
        raise ValueError("frames must be >= 1")
    workers = resolve_workers(workers)
    elapsed = 0.0
    for frame_id in range(config.frames):
        t0 = time.perf_counter()
        frame = simulate_frame(config, frame_id, workers)
        elapsed += time.perf_counter() - t0
        try:
            sink.write(frame)
        except Exception as exc:
            raise SinkError(frame_id, exc) from exc
    return RunSummary(config.frames, config.frames * config.sensor.beam_count, elapsed)
