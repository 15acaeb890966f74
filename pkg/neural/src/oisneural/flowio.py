"""Middlebury .flo files as bare float32 arrays.

Layout: little-endian float32 magic 202021.25 (the bytes "PIEH"), int32
width, int32 height, then row-major interleaved float32 (u, v). This is the
exchange format with the toolkit that exports training data; files written
here read back there byte for byte and vice versa.
"""

import struct

import numpy as np

FLO_MAGIC = 202021.25


def read_flo(path) -> np.ndarray:
    """Read a .flo file into a (height, width, 2) float32 array."""
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) != 12:
            raise ValueError(f"{path}: truncated header")
        magic, width, height = struct.unpack("<fii", header)
        if magic != np.float32(FLO_MAGIC):
            raise ValueError(f"{path}: bad magic {magic!r}")
        if width <= 0 or height <= 0:
            raise ValueError(f"{path}: bad dimensions {width}x{height}")
        payload = fh.read()
    expected = width * height * 2 * 4
    if len(payload) != expected:
        raise ValueError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4")
    return data.reshape(height, width, 2).copy()


def write_flo(path, uv: np.ndarray) -> None:
    """Write a (height, width, 2) array as float32 .flo."""
    uv = np.asarray(uv)
    if uv.ndim != 3 or uv.shape[2] != 2:
        raise ValueError(f"flow must have shape (h, w, 2), got {uv.shape}")
    height, width = uv.shape[:2]
    with open(path, "wb") as fh:
        fh.write(struct.pack("<fii", FLO_MAGIC, width, height))
        fh.write(uv.astype("<f4").tobytes(order="C"))
