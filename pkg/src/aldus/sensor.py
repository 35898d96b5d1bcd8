"""Spinning LIDAR device model.

Presets carry datasheet geometry for the Velodyne VLP-16 and Ouster OS1-64.
Radiometry is deliberately simple and uncalibrated: returns scale as
``K * reflectivity * T**2 / R**2`` and are quantized to the 0-255
reflectivity channel both devices emit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Tuple

import numpy as np

from .scene import Ray

INTENSITY_MAX = 255
RETURN_MODES = ("first", "strongest")


@dataclass(frozen=True)
class IntensityCalib:
    K: float = 25600.0
    I_min: float = 0.5
    intensity_max: int = INTENSITY_MAX

    def __post_init__(self):
        if not self.K > 0.0:
            raise ValueError(f"K must be > 0, got {self.K}")
        if not 0.0 <= self.I_min < self.intensity_max:
            raise ValueError(f"I_min must be in [0, {self.intensity_max}), got {self.I_min}")


@dataclass(frozen=True)
class Pose:
    position: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    yaw_deg: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(c) for c in self.position))
        if len(self.position) != 3:
            raise ValueError("pose position must have 3 components")


@dataclass(frozen=True)
class SensorModel:
    name: str
    vertical_angles: Tuple[float, ...]
    azimuth_steps: int
    max_range: float
    min_range: float
    range_noise_sigma: float = 0.03
    detection_threshold: float = 0.5
    intensity_scale: float = 25600.0
    rotation_rate: float = 10.0
    return_mode: str = "first"
    intensity_max: int = field(default=INTENSITY_MAX, init=False)

    def __post_init__(self):
        object.__setattr__(self, "vertical_angles", tuple(float(a) for a in self.vertical_angles))
        if not self.vertical_angles:
            raise ValueError("vertical_angles must contain at least one angle")
        if list(self.vertical_angles) != sorted(self.vertical_angles):
            raise ValueError("vertical_angles must be sorted ascending")
        if self.azimuth_steps < 1:
            raise ValueError(f"azimuth_steps must be >= 1, got {self.azimuth_steps}")
        if not 0.0 <= self.min_range < self.max_range:
            raise ValueError("min_range must be >= 0 and < max_range")
        if self.range_noise_sigma < 0.0:
            raise ValueError("range_noise_sigma must be >= 0")
        if self.rotation_rate <= 0.0:
            raise ValueError("rotation_rate must be > 0")
        if self.return_mode not in RETURN_MODES:
            raise ValueError(f"return_mode must be one of {RETURN_MODES}, got {self.return_mode!r}")
        self.calib  # validates K and I_min

    @property
    def channels(self) -> int:
        return len(self.vertical_angles)

    @property
    def azimuth_step_deg(self) -> float:
        return 360.0 / self.azimuth_steps

    @property
    def beam_count(self) -> int:
        return self.channels * self.azimuth_steps

    @property
    def calib(self) -> IntensityCalib:
        return IntensityCalib(self.intensity_scale, self.detection_threshold, self.intensity_max)

    def with_overrides(self, **overrides) -> "SensorModel":
        allowed = {f.name for f in fields(self) if f.init}
        unknown = set(overrides) - allowed
        if unknown:
            raise ValueError(f"unknown sensor field(s): {sorted(unknown)}")
        return replace(self, **overrides)


def _vlp16() -> SensorModel:
    return SensorModel(
        name="vlp16",
        vertical_angles=tuple(float(a) for a in range(-15, 16, 2)),
        azimuth_steps=1800,
        max_range=100.0,
        min_range=1.0,
    )


def _os1_64() -> SensorModel:
    return SensorModel(
        name="os1-64",
        vertical_angles=tuple(float(a) for a in np.linspace(-22.5, 22.5, 64)),
        azimuth_steps=1024,
        max_range=120.0,
        min_range=0.8,
    )


PRESETS = {"vlp16": _vlp16, "os1-64": _os1_64}


def preset(name: str) -> SensorModel:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown sensor preset {name!r}; valid presets: {sorted(PRESETS)}") from None


def beam_angles(sensor: SensorModel, yaw_deg: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """Channel-major ``(elevation_deg, azimuth_deg)`` for every beam."""
    elev = np.repeat(np.asarray(sensor.vertical_angles), sensor.azimuth_steps)
    az_idx = np.tile(np.arange(sensor.azimuth_steps), sensor.channels)
    azim = az_idx * sensor.azimuth_step_deg + yaw_deg
    return elev, azim


def beam_directions(sensor: SensorModel, yaw_deg: float = 0.0) -> np.ndarray:
    """Unit directions, shape ``(channels * azimuth_steps, 3)``, channel-major."""
    elev, azim = beam_angles(sensor, yaw_deg)
    return directions_from_angles(elev, azim)


def directions_from_angles(elev_deg, azim_deg) -> np.ndarray:
    el = np.radians(np.asarray(elev_deg, dtype=float))
    az = np.radians(np.asarray(azim_deg, dtype=float))
    ce = np.cos(el)
    return np.stack([ce * np.cos(az), ce * np.sin(az), np.sin(el)], axis=-1)


def scan_rays(sensor: SensorModel, pose: Pose = Pose()) -> list:
    """One revolution of rays, channel-major."""
    dirs = beam_directions(sensor, pose.yaw_deg)
    rays = []
    i = 0
    for c in range(sensor.channels):
        for a in range(sensor.azimuth_steps):
            d = dirs[i]
            rays.append(Ray(pose.position, tuple(d / math.sqrt(d @ d)), c, a))
            i += 1
    return rays


def target_return_intensity(reflectivity: float, range_m: float, transmittance: float, calib: IntensityCalib) -> float:
    if range_m <= 0.0:
        raise ValueError("range must be > 0")
    return calib.K * reflectivity * transmittance * transmittance / (range_m * range_m)


def quantize_intensity(intensity):
    return np.rint(np.minimum(intensity, INTENSITY_MAX))


def detect(intensity: float, range_m: float, sensor: SensorModel, noise_draw: float) -> Optional[Tuple[float, int]]:
    """Threshold, range-gate and quantize one candidate return."""
    if intensity < sensor.detection_threshold or range_m < sensor.min_range or range_m > sensor.max_range:
        return None
    reported = range_m + sensor.range_noise_sigma * noise_draw
    reported = min(max(reported, sensor.min_range), sensor.max_range)
    return reported, int(quantize_intensity(intensity))


def detect_batch(intensity: np.ndarray, range_m: np.ndarray, sensor: SensorModel, noise: np.ndarray):
    """Vectorized :func:`detect`: ``(detected, reported_range, quantized)``."""
    with np.errstate(invalid="ignore"):
        ok = (intensity >= sensor.detection_threshold) & (range_m >= sensor.min_range) & (range_m <= sensor.max_range)
    reported = np.clip(range_m + sensor.range_noise_sigma * noise, sensor.min_range, sensor.max_range)
    q = quantize_intensity(np.where(ok, intensity, 0.0)).astype(np.uint8)
    return ok, reported, q
