"""Point-cloud file codecs.

Text: one point per line, ``x y z`` or ``x y z r g b``, whitespace-separated
decimals, full float64 precision on write.

Binary "PCB1": 4-byte magic ``PCB1``, u32 little-endian point count, u8 flag
(0 = xyz, 1 = xyzrgb), then f32 little-endian values row-major. Note the
payload is f32: a binary round-trip quantizes coordinates to single precision.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .errors import ParseError

_MAGIC = b"PCB1"


def read_cloud_text(path: str | Path) -> PointCloud:
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            toks = line.split()
            if not toks:
                continue
            if len(toks) not in (3, 6):
                raise ParseError(f"{path}:{lineno}: expected 3 or 6 values, got {len(toks)}")
            if width is None:
                width = len(toks)
            elif len(toks) != width:
                raise ParseError(f"{path}:{lineno}: mixed {width}- and {len(toks)}-column rows")
            try:
                vals = [float(t) for t in toks]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if not all(np.isfinite(v) for v in vals):
                raise ParseError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        return PointCloud(np.empty((0, 3)))
    arr = np.asarray(rows, dtype=np.float64)
    if width == 6:
        return PointCloud(arr[:, :3], arr[:, 3:])
    return PointCloud(arr)


def write_cloud_text(cloud: PointCloud, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(len(cloud)):
            vals = list(cloud.points[i])
            if cloud.colors is not None:
                vals += list(cloud.colors[i])
            fh.write(" ".join(repr(float(v)) for v in vals) + "\n")


def read_cloud_pcb(path: str | Path) -> PointCloud:
    blob = Path(path).read_bytes()
    if len(blob) < 9 or blob[:4] != _MAGIC:
        raise ParseError(f"{path}: not a PCB1 file")
    (count,) = struct.unpack_from("<I", blob, 4)
    flag = blob[8]
    if flag not in (0, 1):
        raise ParseError(f"{path}: unknown layout flag {flag}")
    width = 3 if flag == 0 else 6
    payload = blob[9:]
    expected = count * width * 4
    if len(payload) != expected:
        raise ParseError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    arr = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(count, width)
    if flag == 1:
        return PointCloud(arr[:, :3], arr[:, 3:])
    return PointCloud(arr)


def write_cloud_pcb(cloud: PointCloud, path: str | Path) -> None:
    flag = 0 if cloud.colors is None else 1
    data = cloud.points if flag == 0 else np.hstack([cloud.points, cloud.colors])
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(cloud)))
        fh.write(struct.pack("B", flag))
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def read_cloud(path: str | Path) -> PointCloud:
    """Sniff the on-disk format by magic bytes; fall back to text."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == _MAGIC:
        return read_cloud_pcb(path)
    return read_cloud_text(path)


def write_cloud(cloud: PointCloud, path: str | Path) -> None:
    """Write binary when the suffix is .pcb, text otherwise."""
    if Path(path).suffix.lower() == ".pcb":
        write_cloud_pcb(cloud, path)
    else:
        write_cloud_text(cloud, path)
