"""VLP-16 packet parsing, frame assembly, and the portable frame CSV format.

The sensor emits 1206-byte UDP data packets: 12 blocks of 100 bytes (a 0xFFEE
flag, a little-endian azimuth in hundredths of a degree, then 32 channel
records of two-byte distance in 2 mm units plus one reflectivity byte),
followed by a four-byte microsecond timestamp and a two-byte factory field.
Each block carries two firing groups of the 16 lasers; the second group's
azimuth is interpolated halfway toward the next block.  A full rotation of
blocks makes one frame.
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .pointcloud import FrameSequence, Point3, PointFrame

PACKET_SIZE = 1206
BLOCKS_PER_PACKET = 12
BLOCK_SIZE = 100
CHANNELS_PER_BLOCK = 32
BLOCK_FLAG = b"\xff\xee"
DISTANCE_RESOLUTION_M = 0.002
AZIMUTH_SCALE = 0.01  # hundredths of a degree
RETURN_MODE_STRONGEST = 0x37
RETURN_MODE_LAST = 0x38
RETURN_MODE_DUAL = 0x39
DEFAULT_RATE_HZ = 10.0


class MalformedPacketError(ValueError):
    """Base for packets that violate the wire format."""


class BadLengthError(MalformedPacketError):
    pass


class BadBlockFlagError(MalformedPacketError):
    def __init__(self, offset: int, found: bytes):
        self.offset = offset
        super().__init__(f"bad block flag {found!r} at byte offset {offset}")


class DualReturnError(MalformedPacketError):
    """Dual-return packets are rejected; only single-return captures are supported."""


class EmptyStreamError(ValueError):
    pass


class MalformedHeaderError(ValueError):
    pass


class MalformedRowError(ValueError):
    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class NonMonotonicFramesError(ValueError):
    pass


@dataclass(frozen=True)
class LaserCalibration:
    """Fixed elevation angle per channel, degrees."""

    elevations: tuple[float, ...] = (
        -15.0, 1.0, -13.0, 3.0, -11.0, 5.0, -9.0, 7.0,
        -7.0, 9.0, -5.0, 11.0, -3.0, 13.0, -1.0, 15.0,
    )

    def __post_init__(self) -> None:
        if len(self.elevations) != 16:
            raise ValueError("calibration needs exactly 16 elevation angles")

    def elevation(self, channel: int) -> float:
        return self.elevations[channel % 16]


class LaserReturn(NamedTuple):
    azimuth_deg: float
    elevation_deg: float
    range_m: float
    reflectivity: int
    timestamp_us: int


def _validate_packet(payload: bytes) -> None:
    if len(payload) != PACKET_SIZE:
        raise BadLengthError(f"packet must be {PACKET_SIZE} bytes, got {len(payload)}")
    return_mode = payload[1204]
    if return_mode == RETURN_MODE_DUAL:
        raise DualReturnError("dual-return packets are not supported")


def _block_azimuths(payload: bytes) -> list[int]:
    azimuths = []
    for b in range(BLOCKS_PER_PACKET):
        offset = b * BLOCK_SIZE
        if payload[offset : offset + 2] != BLOCK_FLAG:
            raise BadBlockFlagError(offset, payload[offset : offset + 2])
        (azimuth,) = struct.unpack_from("<H", payload, offset + 2)
        if azimuth >= 36000:
            raise MalformedPacketError(f"azimuth {azimuth} out of range in block {b}")
        azimuths.append(azimuth)
    return azimuths


def _interpolated_azimuth(azimuths: list[int], block: int) -> float:
    """Azimuth of a block's second firing group, halfway to the next block (wrap-aware)."""
    current = azimuths[block]
    if block + 1 < len(azimuths):
        gap = (azimuths[block + 1] - current) % 36000
    elif block > 0:
        gap = (current - azimuths[block - 1]) % 36000
    else:
        gap = 0
    return ((current + gap / 2.0) % 36000) * AZIMUTH_SCALE


def _iter_blocks(
    payload: bytes, cal: LaserCalibration
) -> Iterator[tuple[int, list[LaserReturn]]]:
    """Yield (raw block azimuth, returns) per block, dropping zero-distance records."""
    _validate_packet(payload)
    azimuths = _block_azimuths(payload)
    (timestamp_us,) = struct.unpack_from("<I", payload, 1200)
    for b in range(BLOCKS_PER_PACKET):
        offset = b * BLOCK_SIZE + 4
        first_az = azimuths[b] * AZIMUTH_SCALE
        second_az = _interpolated_azimuth(azimuths, b)
        returns: list[LaserReturn] = []
        for ch in range(CHANNELS_PER_BLOCK):
            rec = offset + ch * 3
            distance, reflectivity = struct.unpack_from("<HB", payload, rec)
            if distance == 0:
                continue
            azimuth = first_az if ch < 16 else second_az
            returns.append(
                LaserReturn(
                    azimuth_deg=azimuth,
                    elevation_deg=cal.elevation(ch),
                    range_m=distance * DISTANCE_RESOLUTION_M,
                    reflectivity=reflectivity,
                    timestamp_us=timestamp_us,
                )
            )
        yield azimuths[b], returns


def parse_packet(payload: bytes, cal: LaserCalibration | None = None) -> list[LaserReturn]:
    """Decode one data packet into laser returns; zero-distance records are omitted."""
    cal = cal or LaserCalibration()
    returns: list[LaserReturn] = []
    for _, block_returns in _iter_blocks(payload, cal):
        returns.extend(block_returns)
    return returns


def build_packet(
    block_azimuths: list[int],
    distances: list[list[int]],
    reflectivities: list[list[int]] | None = None,
    timestamp_us: int = 0,
    return_mode: int = RETURN_MODE_STRONGEST,
    product_id: int = 0x22,
) -> bytes:
    """Assemble a wire-format packet from raw block azimuths and channel distances.

    ``distances`` holds, per block, 32 raw distance words (2 mm units); zero
    means no return.  Used by tests and the synthetic packet stream.
    """
    if len(block_azimuths) != BLOCKS_PER_PACKET or len(distances) != BLOCKS_PER_PACKET:
        raise ValueError(f"need exactly {BLOCKS_PER_PACKET} blocks")
    out = bytearray()
    for b in range(BLOCKS_PER_PACKET):
        out += BLOCK_FLAG
        out += struct.pack("<H", block_azimuths[b] % 36000)
        refl = reflectivities[b] if reflectivities else [0] * CHANNELS_PER_BLOCK
        if len(distances[b]) != CHANNELS_PER_BLOCK:
            raise ValueError(f"block {b} needs {CHANNELS_PER_BLOCK} channel records")
        for ch in range(CHANNELS_PER_BLOCK):
            out += struct.pack("<HB", distances[b][ch], refl[ch])
    out += struct.pack("<I", timestamp_us & 0xFFFFFFFF)
    out += bytes([return_mode, product_id])
    assert len(out) == PACKET_SIZE
    return bytes(out)


def to_cartesian(azimuth_deg: float, elevation_deg: float, range_m: float) -> Point3:
    """Sensor-frame coordinates: x right, y forward, z up (angles in degrees)."""
    az = np.deg2rad(azimuth_deg)
    el = np.deg2rad(elevation_deg)
    cos_el = np.cos(el)
    return Point3(
        x=float(range_m * cos_el * np.sin(az)),
        y=float(range_m * cos_el * np.cos(az)),
        z=float(range_m * np.sin(el)),
    )


def assemble_frames(
    packets: Iterable[bytes], cal: LaserCalibration | None = None
) -> FrameSequence:
    """Group a time-ordered packet stream into one frame per rotation.

    A new frame starts whenever a block azimuth is lower than its predecessor
    (the sweep wrapped past 360 degrees).  Frame timestamps are the first packet
    timestamp of each rotation, rebased to the start of the stream.
    """
    cal = cal or LaserCalibration()
    frames: list[PointFrame] = []
    current: list[Point3] = []
    prev_azimuth: int | None = None
    frame_start_us: int | None = None
    stream_start_us: int | None = None

    def close_frame() -> None:
        nonlocal current, frame_start_us
        assert frame_start_us is not None and stream_start_us is not None
        frames.append(
            PointFrame(
                index=len(frames),
                timestamp=(frame_start_us - stream_start_us) / 1e6,
                points=np.array([[p.x, p.y, p.z] for p in current]).reshape(-1, 3),
            )
        )
        current = []
        frame_start_us = None

    seen_any = False
    for payload in packets:
        seen_any = True
        _validate_packet(payload)
        (packet_us,) = struct.unpack_from("<I", payload, 1200)
        if stream_start_us is None:
            stream_start_us = packet_us
        for azimuth_raw, returns in _iter_blocks(payload, cal):
            if prev_azimuth is not None and azimuth_raw < prev_azimuth and current:
                close_frame()
            if frame_start_us is None:
                frame_start_us = packet_us
            current.extend(
                to_cartesian(r.azimuth_deg, r.elevation_deg, r.range_m) for r in returns
            )
            prev_azimuth = azimuth_raw
    if not seen_any:
        raise EmptyStreamError("no packets in stream")
    if frame_start_us is not None:
        close_frame()

    if len(frames) >= 2:
        spacings = np.diff([f.timestamp for f in frames])
        median = float(np.median(spacings))
        rate = 1.0 / median if median > 0 else DEFAULT_RATE_HZ
    else:
        rate = DEFAULT_RATE_HZ
    return FrameSequence(frames=frames, nominal_rate=rate)


FRAME_CSV_HEADER = "frame,t,x,y,z"


def write_frames_csv(seq: FrameSequence, path: str | Path) -> None:
    """Write a frame sequence in the portable CSV format (one point per row)."""
    lines = [FRAME_CSV_HEADER]
    for frame in seq.frames:
        t = repr(float(frame.timestamp))
        for x, y, z in frame.points:
            lines.append(f"{frame.index},{t},{x:.10g},{y:.10g},{z:.10g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_frames_csv(path: str | Path) -> FrameSequence:
    """Read the portable frame CSV; rows grouped by the non-decreasing frame column."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0].strip() != FRAME_CSV_HEADER:
        found = lines[0].strip() if lines else "<empty file>"
        raise MalformedHeaderError(f"expected header {FRAME_CSV_HEADER!r}, found {found!r}")

    frames: list[PointFrame] = []
    current_id: int | None = None
    current_t = 0.0
    current_pts: list[list[float]] = []

    def close_group() -> None:
        assert current_id is not None
        frames.append(
            PointFrame(index=current_id, timestamp=current_t, points=np.array(current_pts))
        )

    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != 5:
            raise MalformedRowError(lineno, f"expected 5 columns, got {len(cells)}")
        try:
            frame_id = int(cells[0])
            t = float(cells[1])
            xyz = [float(cells[2]), float(cells[3]), float(cells[4])]
        except ValueError as exc:
            raise MalformedRowError(lineno, str(exc)) from None
        if frame_id < 0:
            raise MalformedRowError(lineno, f"negative frame id {frame_id}")
        if current_id is None:
            current_id, current_t = frame_id, t
        elif frame_id != current_id:
            if frame_id < current_id:
                raise NonMonotonicFramesError(
                    f"line {lineno}: frame {frame_id} after frame {current_id}"
                )
            close_group()
            current_id, current_t = frame_id, t
            current_pts = []
        current_pts.append(xyz)
    if current_id is None:
        raise MalformedHeaderError("file contains a header but no data rows")
    close_group()

    stamps = [f.timestamp for f in frames]
    if len(stamps) >= 2:
        spacings = np.diff(stamps)
        positive = spacings[spacings > 0]
        rate = 1.0 / float(np.median(positive)) if positive.size else DEFAULT_RATE_HZ
    else:
        rate = DEFAULT_RATE_HZ
    return FrameSequence(frames=frames, nominal_rate=rate)


def write_packet_file(packets: Iterable[bytes], path: str | Path) -> None:
    """Concatenate raw payloads with no delimiters."""
    with open(path, "wb") as fh:
        for payload in packets:
            if len(payload) != PACKET_SIZE:
                raise BadLengthError(
                    f"payload of {len(payload)} bytes (packets are {PACKET_SIZE})"
                )
            fh.write(payload)


def read_packet_file(path: str | Path) -> list[bytes]:
    """Split a file of concatenated payloads back into 1206-byte packets."""
    blob = Path(path).read_bytes()
    if len(blob) % PACKET_SIZE != 0:
        raise BadLengthError(
            f"file size {len(blob)} is not a multiple of {PACKET_SIZE} bytes"
        )
    return [blob[i : i + PACKET_SIZE] for i in range(0, len(blob), PACKET_SIZE)]


def capture_udp(
    port: int, packet_count: int, host: str = "127.0.0.1", timeout: float = 5.0
) -> list[bytes]:
    """Receive ``packet_count`` datagrams (one payload each) from a UDP socket.

    Oversized or undersized datagrams raise ``BadLengthError`` so a capture
    cannot silently mix in foreign traffic.
    """
    packets: list[bytes] = []
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
        sock.settimeout(timeout)
        sock.bind((host, port))
        while len(packets) < packet_count:
            payload, _ = sock.recvfrom(PACKET_SIZE + 64)
            if len(payload) != PACKET_SIZE:
                raise BadLengthError(
                    f"datagram of {len(payload)} bytes (packets are {PACKET_SIZE})"
                )
            packets.append(payload)
    return packets
