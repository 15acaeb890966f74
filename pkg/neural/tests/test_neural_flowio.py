"""The .flo layer must match the exporter's byte layout exactly."""

import struct

import numpy as np
import pytest

from oisneural.flowio import read_flo, write_flo


def test_round_trip_is_float32_exact(tmp_path):
    rng = np.random.default_rng(3)
    uv = rng.normal(scale=30.0, size=(17, 23, 2)).astype(np.float32)
    path = tmp_path / "a.flo"
    write_flo(path, uv)
    back = read_flo(path)
    assert back.dtype == np.float32
    assert np.array_equal(back, uv)


def test_header_layout(tmp_path):
    uv = np.zeros((4, 7, 2), dtype=np.float32)
    path = tmp_path / "a.flo"
    write_flo(path, uv)
    blob = path.read_bytes()
    assert blob[:4] == b"PIEH"
    width, height = struct.unpack("<ii", blob[4:12])
    assert (width, height) == (7, 4)
    assert len(blob) == 12 + 7 * 4 * 2 * 4


def test_reads_hand_built_file(tmp_path):
    data = np.arange(12, dtype="<f4")
    path = tmp_path / "hand.flo"
    path.write_bytes(struct.pack("<fii", 202021.25, 3, 2) + data.tobytes())
    uv = read_flo(path)
    assert uv.shape == (2, 3, 2)
    assert np.array_equal(uv.ravel(), data)


def test_float64_input_written_as_float32(tmp_path):
    uv = np.full((2, 2, 2), 1.0 / 3.0, dtype=np.float64)
    path = tmp_path / "a.flo"
    write_flo(path, uv)
    assert np.array_equal(read_flo(path), uv.astype(np.float32))


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.flo"
    path.write_bytes(struct.pack("<fii", 1.0, 2, 2) + b"\x00" * 32)
    with pytest.raises(ValueError, match="magic"):
        read_flo(path)


def test_truncated_payload_rejected(tmp_path):
    path = tmp_path / "cut.flo"
    path.write_bytes(struct.pack("<fii", 202021.25, 4, 4) + b"\x00" * 10)
    with pytest.raises(ValueError, match="payload"):
        read_flo(path)


def test_bad_dimensions_rejected(tmp_path):
    path = tmp_path / "dims.flo"
    path.write_bytes(struct.pack("<fii", 202021.25, 0, 4))
    with pytest.raises(ValueError, match="dimensions"):
        read_flo(path)


def test_write_rejects_wrong_shape(tmp_path):
    with pytest.raises(ValueError, match="shape"):
        write_flo(tmp_path / "x.flo", np.zeros((4, 4, 3)))
