"""ALDS frame-stream wire protocol (one-way, little-endian).

Layout::

    session header   u32 magic 0x414C4453 ("ALDS"), u16 version = 1, u16 reserved = 0
    per frame        u64 frame_id, u32 point_count,
                     point_count x 16-byte records:
                         u16 channel, u16 flags (bit0 = dust),
                         f32 azimuth_deg, f32 range_m,
                         u8 intensity, 3 x u8 padding (zero)

The server accepts exactly one client, sends the header and every frame in
order, then closes the connection.
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from .sim import KIND_DUST, Frame

MAGIC = 0x414C4453
VERSION = 1
SESSION_HEADER = struct.Struct("<IHH")
FRAME_HEADER = struct.Struct("<QI")
RECORD_DTYPE = np.dtype(
    [("channel", "<u2"), ("flags", "<u2"), ("azimuth_deg", "<f4"), ("range_m", "<f4"),
     ("intensity", "u1"), ("pad", "u1", (3,))]
)
FLAG_DUST = 0x1

assert SESSION_HEADER.size == 8 and FRAME_HEADER.size == 12 and RECORD_DTYPE.itemsize == 16


class ProtocolError(ValueError):
    pass


@dataclass
class DecodedFrame:
    frame_id: int
    records: np.ndarray  # RECORD_DTYPE

    @property
    def is_dust(self) -> np.ndarray:
        return (self.records["flags"] & FLAG_DUST).astype(bool)


def encode_session_header() -> bytes:
    return SESSION_HEADER.pack(MAGIC, VERSION, 0)


def encode_frame(frame: Frame) -> bytes:
    n = len(frame)
    rec = np.zeros(n, dtype=RECORD_DTYPE)
    rec["channel"] = frame.channel
    rec["flags"] = np.where(frame.kind == KIND_DUST, FLAG_DUST, 0)
    rec["azimuth_deg"] = frame.azimuth_deg
    rec["range_m"] = frame.range
    rec["intensity"] = frame.intensity
    return FRAME_HEADER.pack(frame.frame_id, n) + rec.tobytes()


def encode_stream(frames: Iterable[Frame]) -> bytes:
    return encode_session_header() + b"".join(encode_frame(f) for f in frames)


def decode_session_header(data: bytes) -> int:
    if len(data) < SESSION_HEADER.size:
        raise ProtocolError("truncated session header")
    magic, version, _ = SESSION_HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic 0x{magic:08X}")
    if version != VERSION:
        raise ProtocolError(f"unsupported protocol version {version} (expected {VERSION})")
    return SESSION_HEADER.size


def decode_stream(data: bytes) -> List[DecodedFrame]:
    off = decode_session_header(data)
    frames = []
    while off < len(data):
        if len(data) - off < FRAME_HEADER.size:
            raise ProtocolError(f"truncated frame header at byte {off}")
        frame_id, n = FRAME_HEADER.unpack_from(data, off)
        off += FRAME_HEADER.size
        size = n * RECORD_DTYPE.itemsize
        if len(data) - off < size:
            raise ProtocolError(f"frame {frame_id}: truncated records")
        rec = np.frombuffer(data, dtype=RECORD_DTYPE, count=n, offset=off).copy()
        off += size
        frames.append(DecodedFrame(frame_id, rec))
    return frames


def parse_address(address: str) -> Tuple[str, int]:
    host, sep, port = address.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"stream address must be host:port, got {address!r}")
    return host or "127.0.0.1", int(port)


class StreamSink:
    """Listens on ``address``, waits for one client, then streams frames."""

    def __init__(self, address: str, accept_timeout: Optional[float] = None):
        host, port = parse_address(address)
        self._server = socket.create_server((host, port))
        self._server.settimeout(accept_timeout)
        self._conn: Optional[socket.socket] = None

    @property
    def port(self) -> int:
        return self._server.getsockname()[1]

    def _connection(self) -> socket.socket:
        if self._conn is None:
            self._conn, _ = self._server.accept()
            self._conn.settimeout(None)
            self._conn.sendall(encode_session_header())
        return self._conn

    def write(self, frame: Frame) -> None:
        self._connection().sendall(encode_frame(frame))

    def close(self) -> None:
        if self._conn is not None:
            try:
                self._conn.shutdown(socket.SHUT_WR)
            except OSError:
                pass
            self._conn.close()
        self._server.close()


def stream_frames(address: str, frames: Iterable[Frame], accept_timeout: Optional[float] = None) -> int:
    """Serve ``frames`` to the first client that connects; returns frames sent."""
    sink = StreamSink(address, accept_timeout)
    sent = 0
    try:
        sink._connection()
        for frame in frames:
            sink.write(frame)
            sent += 1
    finally:
        sink.close()
    return sent


def receive_stream(address: str, timeout: float = 10.0) -> List[DecodedFrame]:
    """Connect as a client and read until the server closes."""
    host, port = parse_address(address)
    chunks = []
    with socket.create_connection((host, port), timeout=timeout) as conn:
        while True:
            buf = conn.recv(1 << 16)
            if not buf:
                break
            chunks.append(buf)
    return decode_stream(b"".join(chunks))
