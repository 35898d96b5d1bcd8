"""Static mode: corrupt recorded point clouds with modeled dust.

Each recorded point's beam is rebuilt from ``(channel, azimuth)`` using the
same direction table and beam-keyed draws as the frame engine, so injecting
into a clean simulated frame reproduces the dusty simulation. Recorded
intensities are attenuated multiplicatively (``I * T**2``); their absolute
calibration is unknown, so this is ordinal fidelity only. Beams that never
returned in the recording cannot gain dust points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from . import rng
from .formats import RecordedPoint
from .medium import DustCloud, extinction_coefficient, sample_scatter_batch
from .scene import RayBatch, shape_interval_batch
from .sensor import Pose, SensorModel, detect_batch, quantize_intensity
from .sim import KIND_DUST, KIND_NAMES, Frame, LidarReturn, _beam_geometry


class InjectError(ValueError):
    pass


@dataclass
class InjectReport:
    kept: int = 0
    attenuated: int = 0
    replaced: int = 0
    dropped: int = 0

    @property
    def total(self) -> int:
        return self.kept + self.attenuated + self.replaced + self.dropped

    def __iadd__(self, other: "InjectReport") -> "InjectReport":
        self.kept += other.kept
        self.attenuated += other.attenuated
        self.replaced += other.replaced
        self.dropped += other.dropped
        return self

    def __str__(self) -> str:
        return f"kept={self.kept} attenuated={self.attenuated} replaced={self.replaced} dropped={self.dropped}"


def azimuth_index(azimuth_deg, sensor: SensorModel, yaw_deg: float = 0.0) -> np.ndarray:
    rel = np.mod(np.asarray(azimuth_deg, float) - yaw_deg, 360.0)
    return np.mod(np.rint(rel / sensor.azimuth_step_deg).astype(np.int64), sensor.azimuth_steps)


def check_channels(points: Sequence[RecordedPoint], sensor: SensorModel) -> None:
    bad = sorted({p.channel for p in points if not 0 <= p.channel < sensor.channels})
    if bad:
        raise InjectError(
            f"channel(s) {bad} not covered by sensor {sensor.name!r} "
            f"(valid 0..{sensor.channels - 1})"
        )


def _runs(points: Sequence[RecordedPoint]) -> List[Tuple[int, int]]:
    """Contiguous ``[start, stop)`` runs sharing a frame id."""
    runs, start = [], 0
    for i in range(1, len(points) + 1):
        if i == len(points) or points[i].frame_id != points[start].frame_id:
            runs.append((start, i))
            start = i
    return runs


def _inject_run(points, clouds, sensor, seed, pose) -> Tuple[Frame, InjectReport]:
    n = len(points)
    frame_id = points[0].frame_id
    elev_tab, _, dirs_tab, _, _ = _beam_geometry(sensor, float(pose.yaw_deg))
    origin = np.asarray(pose.position, float)

    channel = np.array([p.channel for p in points], np.int64)
    az_deg = np.array([p.azimuth_deg for p in points])
    recorded_range = np.array([p.range for p in points])
    recorded_i = np.array([p.intensity for p in points], float)
    az_idx = azimuth_index(az_deg, sensor, pose.yaw_deg)
    beam = channel * sensor.azimuth_steps + az_idx
    dirs = dirs_tab[beam]
    rays = RayBatch(origin, dirs)

    t_in = np.empty((n, len(clouds)))
    t_out = np.empty((n, len(clouds)))
    for j, cloud in enumerate(clouds):
        a, b = shape_interval_batch(rays, cloud.shape)
        t_in[:, j] = np.maximum(a, 0.0)
        t_out[:, j] = np.minimum(b, recorded_range)
    u = rng.uniform(seed, frame_id, channel, az_idx, rng.DRAW_SCATTER)
    z = rng.normal(seed, frame_id, channel, az_idx, rng.DRAW_RANGE_NOISE)
    sc = sample_scatter_batch(t_in, t_out, [extinction_coefficient(c) for c in clouds], u)

    calib = sensor.calib
    albedo = np.array([c.backscatter_albedo for c in clouds] + [0.0])
    cloud_ids = np.array([c.id for c in clouds] + [-1], np.int64)
    t_s = np.where(sc.scattered, sc.t_scatter, 1.0)
    dust_i = np.where(
        sc.scattered,
        calib.K * albedo[sc.cloud_index] * np.exp(-np.where(sc.scattered, sc.tau_pre, 0.0)) / (t_s * t_s),
        0.0,
    )
    dust_ok, dust_r, dust_q = detect_batch(dust_i, np.where(sc.scattered, sc.t_scatter, np.inf), sensor, z)
    replaced = sc.scattered & dust_ok

    untouched = ~sc.scattered & (sc.tau_total == 0.0)
    trans = np.exp(-sc.tau_total)
    att_i = recorded_i * trans * trans
    att_ok, _, att_q = detect_batch(att_i, recorded_range, sensor, np.zeros(n))
    attenuated = ~sc.scattered & ~untouched & att_ok
    keep = untouched | attenuated | replaced

    report = InjectReport(
        kept=int(untouched.sum()),
        attenuated=int(attenuated.sum()),
        replaced=int(replaced.sum()),
        dropped=int(n - keep.sum()),
    )

    out_range = np.where(replaced, dust_r, recorded_range)
    out_i = np.where(replaced, dust_q, np.where(attenuated, att_q, recorded_i)).astype(np.uint8)
    out_kind = np.array([KIND_NAMES.index(p.kind) for p in points], np.uint8)
    out_kind[replaced] = KIND_DUST
    out_src = np.array([p.source_id for p in points], np.int64)
    out_src[replaced] = cloud_ids[sc.cloud_index[replaced]]
    elev = elev_tab[beam].copy()
    pts = origin + out_range[:, None] * dirs
    for i in np.flatnonzero(untouched):
        p = points[i]
        if p.elevation_deg is not None:
            elev[i] = p.elevation_deg
        if p.point is not None:
            pts[i] = p.point

    idx = np.flatnonzero(keep)
    frame = Frame(
        frame_id=frame_id,
        sensor_name=sensor.name,
        seed=seed,
        beam_count=n,
        origin=origin,
        channel=channel[idx],
        azimuth_index=az_idx[idx],
        azimuth_deg=az_deg[idx],
        elevation_deg=elev[idx],
        range=out_range[idx],
        intensity=out_i[idx],
        kind=out_kind[idx],
        source_id=out_src[idx],
        points=pts[idx],
    )
    return frame, report


def inject_frames(
    points: Sequence[RecordedPoint],
    clouds: Sequence[DustCloud],
    sensor: SensorModel,
    seed: int = 0,
    pose: Pose = Pose(),
) -> Tuple[List[Frame], InjectReport]:
    """Inject dust into recorded points; one output frame per run of frame ids.

    A frame's ``beam_count`` is its number of input points, so
    ``dropped_count`` counts points lost to attenuation.
    """
    check_channels(points, sensor)
    clouds = sorted(clouds, key=lambda c: c.id)
    frames, report = [], InjectReport()
    for start, stop in _runs(points):
        frame, rep = _inject_run(points[start:stop], clouds, sensor, seed, pose)
        frames.append(frame)
        report += rep
    return frames, report


def inject_dust(points, clouds, sensor, seed: int = 0, pose: Pose = Pose()) -> Tuple[List[LidarReturn], InjectReport]:
    frames, report = inject_frames(points, clouds, sensor, seed, pose)
    return [r for f in frames for r in f], report


def points_from_frame(frame: Frame) -> List[RecordedPoint]:
    """Treat a simulated frame as a recording (full precision, in memory)."""
    return [
        RecordedPoint(
            channel=int(frame.channel[i]),
            azimuth_deg=float(frame.azimuth_deg[i]),
            range=float(frame.range[i]),
            intensity=int(frame.intensity[i]),
            frame_id=frame.frame_id,
            elevation_deg=float(frame.elevation_deg[i]),
            point=tuple(float(c) for c in frame.points[i]),
            kind=KIND_NAMES[frame.kind[i]],
            source_id=int(frame.source_id[i]),
        )
        for i in range(len(frame))
    ]
