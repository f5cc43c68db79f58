import numpy as np
import pytest

from pointkit import ParseError, PointCloud
from pointkit.cloud_io import (
    read_cloud,
    read_cloud_pcb,
    read_cloud_text,
    write_cloud,
    write_cloud_pcb,
    write_cloud_text,
)


@pytest.fixture
def colored(rng):
    return PointCloud(rng.normal(size=(37, 3)), colors=rng.uniform(size=(37, 3)))


def test_text_roundtrip(tmp_path, colored):
    p = tmp_path / "c.txt"
    write_cloud_text(colored, p)
    back = read_cloud_text(p)
    assert np.array_equal(back.points, colored.points)
    assert np.array_equal(back.colors, colored.colors)


def test_text_without_colors(tmp_path, rng):
    c = PointCloud(rng.normal(size=(5, 3)))
    p = tmp_path / "c.txt"
    write_cloud_text(c, p)
    back = read_cloud_text(p)
    assert back.colors is None
    assert np.array_equal(back.points, c.points)


def test_text_bad_width(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("0 0 0\n1 2\n")
    with pytest.raises(ParseError, match=r"c\.txt:2"):
        read_cloud_text(p)


def test_text_non_numeric(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("0 0 zero\n")
    with pytest.raises(ParseError, match=r"c\.txt:1"):
        read_cloud_text(p)


def test_text_non_finite(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("0 0 inf\n")
    with pytest.raises(ParseError):
        read_cloud_text(p)


def test_pcb_roundtrip(tmp_path, colored):
    p = tmp_path / "c.pcb"
    write_cloud_pcb(colored, p)
    back = read_cloud_pcb(p)
    # payload is f32, so round-tripping the f32 cast is lossless
    assert np.array_equal(back.points, colored.points.astype(np.float32).astype(np.float64))
    assert np.array_equal(back.colors, colored.colors.astype(np.float32).astype(np.float64))


def test_pcb_bad_magic(tmp_path):
    p = tmp_path / "c.pcb"
    p.write_bytes(b"XXXX" + bytes(16))
    with pytest.raises(ParseError, match="magic"):
        read_cloud_pcb(p)


def test_pcb_truncated(tmp_path, colored):
    p = tmp_path / "c.pcb"
    write_cloud_pcb(colored, p)
    blob = p.read_bytes()
    p.write_bytes(blob[:-5])
    with pytest.raises(ParseError):
        read_cloud_pcb(p)


def test_pcb_bad_flag(tmp_path):
    import struct

    p = tmp_path / "c.pcb"
    p.write_bytes(b"PCB1" + struct.pack("<I", 1) + bytes([7]) + bytes(12))
    with pytest.raises(ParseError, match="flag"):
        read_cloud_pcb(p)


def test_dispatch_by_content_and_suffix(tmp_path, colored):
    pcb = tmp_path / "c.pcb"
    txt = tmp_path / "c.txt"
    write_cloud(colored, pcb)
    write_cloud(colored, txt)
    assert pcb.read_bytes()[:4] == b"PCB1"
    a = read_cloud(pcb)
    b = read_cloud(txt)
    assert np.array_equal(a.points, colored.points.astype(np.float32).astype(np.float64))
    assert np.array_equal(b.points, colored.points)
