"""Point-cloud file formats: delimited text (CSV) and ASCII PCD v0.7."""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from .sim import KIND_NAMES, Frame

CSV_COLUMNS = (
    "frame_id", "channel", "azimuth_deg", "elevation_deg", "range_m",
    "x", "y", "z", "intensity", "kind", "source_id",
)
CSV_HEADER = ",".join(CSV_COLUMNS)


class FormatError(ValueError):
    """Malformed point-cloud input; carries the 1-based line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True)
class RecordedPoint:
    channel: int
    azimuth_deg: float
    range: float
    intensity: int
    frame_id: int = 0
    # passthrough columns; None when the source did not provide them
    elevation_deg: Optional[float] = None
    point: Optional[Tuple[float, float, float]] = None
    kind: str = "target"
    source_id: int = -1

    def __post_init__(self):
        if not self.range > 0.0:
            raise ValueError(f"recorded range must be > 0, got {self.range}")


def csv_rows(frame: Frame) -> Iterable[str]:
    fid = str(frame.frame_id)
    cols = zip(
        frame.channel.tolist(), frame.azimuth_deg.tolist(), frame.elevation_deg.tolist(),
        frame.range.tolist(), frame.points.tolist(), frame.intensity.tolist(),
        frame.kind.tolist(), frame.source_id.tolist(),
    )
    for ch, az, el, r, (x, y, z), inten, kind, src in cols:
        yield f"{fid},{ch},{az:.6g},{el:.6g},{r:.6g},{x:.6g},{y:.6g},{z:.6g},{inten},{KIND_NAMES[kind]},{src}"


def write_csv(frame: Frame, header: bool = True) -> str:
    buf = io.StringIO()
    if header:
        buf.write(CSV_HEADER + "\n")
    for row in csv_rows(frame):
        buf.write(row)
        buf.write("\n")
    return buf.getvalue()


def read_csv(text: str) -> List[RecordedPoint]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise FormatError(f"expected header {CSV_HEADER!r}", 1)
    points = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(CSV_COLUMNS):
            raise FormatError(f"expected {len(CSV_COLUMNS)} fields, got {len(cells)}", lineno)
        try:
            frame_id, channel = int(cells[0]), int(cells[1])
            az, el, rng_, x, y, z = (float(c) for c in cells[2:8])
            intensity = int(cells[8])
            source_id = int(cells[10])
        except ValueError as exc:
            raise FormatError(f"non-numeric field ({exc})", lineno) from None
        kind = cells[9]
        if kind not in KIND_NAMES:
            raise FormatError(f"kind must be one of {list(KIND_NAMES)}, got {kind!r}", lineno)
        if not 0 <= intensity <= 255:
            raise FormatError(f"intensity {intensity} outside 0..255", lineno)
        if not rng_ > 0.0:
            raise FormatError(f"range_m must be > 0, got {cells[4]}", lineno)
        points.append(RecordedPoint(channel, az, rng_, intensity, frame_id, el, (x, y, z), kind, source_id))
    return points


def frame_from_points(points: List[RecordedPoint], sensor_name: str = "", seed: int = 0, origin=(0.0, 0.0, 0.0)) -> Frame:
    """Pack recorded points (with passthrough columns) into a Frame for writing."""
    n = len(points)
    frame = Frame.empty(points[0].frame_id if points else 0, sensor_name, seed, n, origin)
    if not n:
        return frame
    frame.channel = np.array([p.channel for p in points], np.int64)
    frame.azimuth_index = np.zeros(n, np.int64)
    frame.azimuth_deg = np.array([p.azimuth_deg for p in points])
    frame.elevation_deg = np.array([p.elevation_deg or 0.0 for p in points])
    frame.range = np.array([p.range for p in points])
    frame.intensity = np.array([p.intensity for p in points], np.uint8)
    frame.kind = np.array([KIND_NAMES.index(p.kind) for p in points], np.uint8)
    frame.source_id = np.array([p.source_id for p in points], np.int64)
    frame.points = np.array([p.point or (0.0, 0.0, 0.0) for p in points], float)
    return frame


def write_pcd(frame: Frame) -> str:
    """ASCII PCD v0.7 with fields ``x y z intensity ring``."""
    n = len(frame)
    lines = [
        "# .PCD v0.7 - Point Cloud Data file format",
        "VERSION 0.7",
        "FIELDS x y z intensity ring",
        "SIZE 4 4 4 4 2",
        "TYPE F F F F U",
        "COUNT 1 1 1 1 1",
        f"WIDTH {n}",
        "HEIGHT 1",
        "VIEWPOINT 0 0 0 1 0 0 0",
        f"POINTS {n}",
        "DATA ascii",
    ]
    for i in range(n):
        x, y, z = frame.points[i]
        lines.append(f"{x:.6f} {y:.6f} {z:.6f} {int(frame.intensity[i])} {int(frame.channel[i])}")
    return "\n".join(lines) + "\n"


def read_pcd_points(text: str) -> np.ndarray:
    """Parse the data section of an ASCII PCD into an ``(n, fields)`` array."""
    lines = text.splitlines()
    header = {}
    for i, line in enumerate(lines):
        if line.startswith("#"):
            continue
        key, _, value = line.partition(" ")
        header[key] = value
        if key == "DATA":
            if value.strip() != "ascii":
                raise FormatError("only ascii PCD is supported", i + 1)
            body = [l for l in lines[i + 1:] if l.strip()]
            n = int(header["POINTS"])
            if len(body) != n:
                raise FormatError(f"POINTS says {n} but found {len(body)} rows", i + 2)
            ncol = len(header["FIELDS"].split())
            if not body:
                return np.zeros((0, ncol))
            return np.array([[float(c) for c in l.split()] for l in body])
    raise FormatError("missing DATA line")
