"""Dense optical-flow container and Middlebury .flo serialization.

Flow fields are stored as (height, width, 2) arrays of forward displacements:
``uv[y, x]`` moves a pixel of the first frame onto the second frame. Files use
the Middlebury layout: a 4-byte float magic (202021.25, the bytes "PIEH"),
int32 width, int32 height, then row-major interleaved float32 (u, v) pairs,
all little-endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import AnnotationError, FlowFormatError

FLO_MAGIC = 202021.25


@dataclass
class FlowField:
    """Forward dense flow from one frame onto the next.

    Attributes:
        uv: (height, width, 2) float array, finite everywhere.
    """

    uv: np.ndarray

    def __post_init__(self):
        self.uv = np.asarray(self.uv, dtype=np.float64)
        if self.uv.ndim != 3 or self.uv.shape[2] != 2:
            raise ValueError(f"flow must have shape (h, w, 2), got {self.uv.shape}")
        if self.uv.shape[0] < 1 or self.uv.shape[1] < 1:
            raise ValueError("flow dimensions must be positive")
        if not np.all(np.isfinite(self.uv)):
            raise ValueError("flow contains non-finite values")

    @property
    def height(self) -> int:
        return self.uv.shape[0]

    @property
    def width(self) -> int:
        return self.uv.shape[1]

    def endpoint_error(self, other: "FlowField") -> float:
        """Mean Euclidean distance between this flow and ``other``."""
        if self.uv.shape != other.uv.shape:
            raise ValueError(
                f"flow shapes differ: {self.uv.shape} vs {other.uv.shape}"
            )
        return float(np.mean(np.linalg.norm(self.uv - other.uv, axis=2)))

    def sample(self, points: np.ndarray) -> np.ndarray:
        """Bilinearly sample the flow at subpixel positions.

        Args:
            points: (n, 2) array of (x, y) positions inside
                [0, width-1] x [0, height-1].

        Returns:
            (n, 2) array of interpolated (u, v) displacements.

        Raises:
            AnnotationError: if any point falls outside the flow domain.
        """
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"points must have shape (n, 2), got {pts.shape}")
        x, y = pts[:, 0], pts[:, 1]
        w, h = self.width, self.height
        inside = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
        if not np.all(inside):
            bad = pts[~inside][0]
            raise AnnotationError(
                f"point ({bad[0]:.3f}, {bad[1]:.3f}) outside flow domain "
                f"{w}x{h}"
            )
        # Clamp the base cell so points on the far edge reuse the last cell.
        x0 = np.clip(np.floor(x).astype(np.int64), 0, max(w - 2, 0))
        y0 = np.clip(np.floor(y).astype(np.int64), 0, max(h - 2, 0))
        x1 = np.minimum(x0 + 1, w - 1)
        y1 = np.minimum(y0 + 1, h - 1)
        fx = (x - x0)[:, None]
        fy = (y - y0)[:, None]
        top = self.uv[y0, x0] * (1.0 - fx) + self.uv[y0, x1] * fx
        bot = self.uv[y1, x0] * (1.0 - fx) + self.uv[y1, x1] * fx
        return top * (1.0 - fy) + bot * fy


def write_flo(path, flow: FlowField) -> None:
    """Write a flow field to a Middlebury .flo file (float32)."""
    data = flow.uv.astype(np.float32)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<fii", FLO_MAGIC, flow.width, flow.height))
        fh.write(data.tobytes(order="C"))


def read_flo(path) -> FlowField:
    """Read a Middlebury .flo file.

    Raises:
        FlowFormatError: on a bad magic number, bad dimensions, or a
            truncated payload.
    """
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) != 12:
            raise FlowFormatError(f"{path}: truncated header")
        magic, width, height = struct.unpack("<fii", header)
        if magic != np.float32(FLO_MAGIC):
            raise FlowFormatError(f"{path}: bad magic {magic!r}")
        if width <= 0 or height <= 0:
            raise FlowFormatError(f"{path}: bad dimensions {width}x{height}")
        payload = fh.read()
    expected = width * height * 2 * 4
    if len(payload) != expected:
        raise FlowFormatError(
            f"{path}: payload has {len(payload)} bytes, expected {expected}"
        )
    uv = np.frombuffer(payload, dtype="<f4").reshape(height, width, 2)
    return FlowField(uv.astype(np.float64))
