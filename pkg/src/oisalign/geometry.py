"""Rotation, intrinsics, and homography primitives.

Conventions used throughout the package:

* Rotation matrices map world coordinates into camera coordinates; the
  relative rotation between two views taken at times ta < tb is
  ``R_ab = R(tb) @ R(ta).T`` and warps view-a rays onto view-b rays.
* A rotation-only homography is ``H = K @ R @ K^-1`` acting on homogeneous
  pixel coordinates, normalized so h22 = 1 whenever |h22| > 1e-12.
* A homography array splits the frame into n horizontal patches; patch i
  governs rows [i*h/n, (i+1)*h/n) and integer row y belongs to patch
  (y * n) // h.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .flowio import FlowField

ROTATION_TOL = 1e-9


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix of a 3-vector: skew(v) @ u == cross(v, u)."""
    v = np.asarray(v, dtype=np.float64)
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def rodrigues(rvec: np.ndarray) -> np.ndarray:
    """Rotation matrix for an axis-angle vector.

    Args:
        rvec: (3,) axis-angle vector; its norm is the angle in radians.

    Returns:
        (3, 3) rotation matrix. Angles below 1e-12 return the exact
        identity.

    Raises:
        ValueError: on wrong shape or non-finite input.
    """
    rvec = np.asarray(rvec, dtype=np.float64)
    if rvec.shape != (3,):
        raise ValueError(f"rotation vector must have shape (3,), got {rvec.shape}")
    if not np.all(np.isfinite(rvec)):
        raise ValueError("rotation vector contains non-finite values")
    angle = float(np.linalg.norm(rvec))
    if angle < 1e-12:
        return np.eye(3)
    k = skew(rvec / angle)
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def rodrigues_many(rvecs: np.ndarray) -> np.ndarray:
    """Vectorized rodrigues for an (n, 3) stack of axis-angle vectors."""
    rvecs = np.asarray(rvecs, dtype=np.float64)
    angles = np.linalg.norm(rvecs, axis=1)
    out = np.tile(np.eye(3), (rvecs.shape[0], 1, 1))
    big = angles >= 1e-12
    if not np.any(big):
        return out
    axes = rvecs[big] / angles[big, None]
    zeros = np.zeros(axes.shape[0])
    k = np.stack(
        [
            np.stack([zeros, -axes[:, 2], axes[:, 1]], axis=1),
            np.stack([axes[:, 2], zeros, -axes[:, 0]], axis=1),
            np.stack([-axes[:, 1], axes[:, 0], zeros], axis=1),
        ],
        axis=1,
    )
    sin = np.sin(angles[big])[:, None, None]
    cos = np.cos(angles[big])[:, None, None]
    out[big] = np.eye(3) + sin * k + (1.0 - cos) * (k @ k)
    return out


def rotation_angle(r: np.ndarray) -> float:
    """Rotation angle of a rotation matrix, in [0, pi].

    atan2 of the axial part against the trace; unlike the plain arccos form
    this stays accurate for near-identity inputs, where arccos loses half
    the significant digits.
    """
    r = np.asarray(r, dtype=np.float64)
    cos_t = (float(np.trace(r)) - 1.0) * 0.5
    sin_t = 0.5 * float(
        np.sqrt(
            (r[2, 1] - r[1, 2]) ** 2
            + (r[0, 2] - r[2, 0]) ** 2
            + (r[1, 0] - r[0, 1]) ** 2
        )
    )
    return float(np.arctan2(sin_t, np.clip(cos_t, -1.0, 1.0)))


def rotation_geodesic(r1: np.ndarray, r2: np.ndarray) -> float:
    """Geodesic distance between two rotations, in radians."""
    return rotation_angle(np.asarray(r1).T @ np.asarray(r2))


def orthonormality_drift(r: np.ndarray) -> float:
    """Frobenius norm of R^T R - I."""
    r = np.asarray(r, dtype=np.float64)
    return float(np.linalg.norm(r.T @ r - np.eye(3)))


def is_rotation(r: np.ndarray, tol: float = ROTATION_TOL) -> bool:
    """Whether r is orthonormal within tol and has determinant +1."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        return False
    return orthonormality_drift(r) <= tol and np.linalg.det(r) > 0.0


def nearest_rotation(m: np.ndarray) -> np.ndarray:
    """Project a 3x3 matrix onto SO(3) (closest in Frobenius norm)."""
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=np.float64))
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def compose_rotations(mats) -> np.ndarray:
    """Left-to-right product of rotations with drift control.

    ``compose_rotations([a, b, c])`` returns a @ b @ c. Whenever the running
    product's orthonormality drift exceeds 1e-9 it is projected back onto
    SO(3), so long products stay valid rotations.
    """
    mats = list(mats)
    if not mats:
        raise ValueError("need at least one rotation to compose")
    out = np.eye(3)
    for m in mats:
        out = out @ np.asarray(m, dtype=np.float64)
        if orthonormality_drift(out) > ROTATION_TOL:
            out = nearest_rotation(out)
    return out


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics with optional skew; units are pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0

    def __post_init__(self):
        vals = (self.fx, self.fy, self.cx, self.cy, self.skew)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("intrinsics contain non-finite values")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.fx, self.skew, self.cx],
                [0.0, self.fy, self.cy],
                [0.0, 0.0, 1.0],
            ]
        )

    @property
    def inverse(self) -> np.ndarray:
        # Closed form keeps the inverse exactly reproducible across platforms.
        fx, fy, s = self.fx, self.fy, self.skew
        return np.array(
            [
                [1.0 / fx, -s / (fx * fy), (s * self.cy - self.cx * fy) / (fx * fy)],
                [0.0, 1.0 / fy, -self.cy / fy],
                [0.0, 0.0, 1.0],
            ]
        )


def normalize_homography(h: np.ndarray) -> np.ndarray:
    """Scale a homography so h22 = 1 when |h22| > 1e-12."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (3, 3):
        raise ValueError(f"homography must be 3x3, got {h.shape}")
    if abs(h[2, 2]) > 1e-12:
        return h / h[2, 2]
    return h.copy()


def rotation_to_homography(r: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    """Rotation-only homography K @ R @ K^-1, h22-normalized.

    Raises:
        ValueError: if r is not a rotation matrix within 1e-9.
    """
    r = np.asarray(r, dtype=np.float64)
    if not is_rotation(r):
        raise ValueError("input is not a rotation matrix within tolerance")
    return normalize_homography(intr.matrix @ r @ intr.inverse)


def apply_homography(h: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Apply a homography to (n, 2) pixel points, dehomogenizing."""
    h = np.asarray(h, dtype=np.float64)
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    ones = np.ones((pts.shape[0], 1))
    q = np.hstack([pts, ones]) @ h.T
    den = q[:, 2]
    if np.any(np.abs(den) <= 1e-12):
        raise ValueError("homography maps a point to infinity")
    return q[:, :2] / den[:, None]


@dataclass
class HomographyArray:
    """Per-patch homographies covering one rolling-shutter frame.

    Attributes:
        mats: (n, 3, 3) float64 homographies, one per horizontal patch,
            ordered top to bottom.
        frame_height: raster height the patches tile.
    """

    mats: np.ndarray
    frame_height: int

    def __post_init__(self):
        self.mats = np.ascontiguousarray(self.mats, dtype=np.float64)
        if self.mats.ndim != 3 or self.mats.shape[1:] != (3, 3):
            raise ValueError(f"mats must have shape (n, 3, 3), got {self.mats.shape}")
        if self.mats.shape[0] < 1:
            raise ValueError("homography array needs at least one patch")
        if not np.all(np.isfinite(self.mats)):
            raise ValueError("homography array contains non-finite values")
        self.frame_height = int(self.frame_height)
        if self.frame_height < 1:
            raise ValueError("frame height must be positive")

    @property
    def n_patches(self) -> int:
        return int(self.mats.shape[0])

    def boundaries(self) -> np.ndarray:
        """(n + 1,) int64 row boundaries; patch i governs rows [b[i], b[i+1])."""
        n, h = self.n_patches, self.frame_height
        idx = np.arange(n + 1, dtype=np.int64)
        return (idx * h + n - 1) // n

    def centers(self) -> np.ndarray:
        """(n,) float64 patch center rows (i + 0.5) * h / n."""
        n, h = self.n_patches, self.frame_height
        return (np.arange(n, dtype=np.float64) + 0.5) * (h / n)

    def patch_of_row(self, y: int) -> int:
        if not 0 <= y < self.frame_height:
            raise ValueError(f"row {y} outside frame of height {self.frame_height}")
        return min(self.n_patches - 1, (int(y) * self.n_patches) // self.frame_height)

    def normalized(self) -> "HomographyArray":
        mats = np.stack([normalize_homography(m) for m in self.mats])
        return HomographyArray(mats, self.frame_height)


def homography_array_to_flow(
    arr: HomographyArray, width: int, height: int, interpolate: bool = False
) -> FlowField:
    """Dense forward flow induced by a homography array.

    Args:
        arr: per-patch homographies; arr.frame_height must equal height.
        width: raster width in pixels.
        height: raster height in pixels.
        interpolate: blend patch flows linearly between patch centers
            instead of the hard per-patch row assignment.

    Returns:
        FlowField of shape (height, width, 2).

    Raises:
        DegenerateWarpError: when a patch homography maps a needed pixel to
            (or numerically through) the line at infinity.
        ValueError: when arr.frame_height does not match height.
    """
    if int(height) != arr.frame_height:
        raise ValueError(
            f"flow height {height} does not match array frame height "
            f"{arr.frame_height}"
        )
    uv = kernels.homography_array_flow(
        arr.mats, arr.boundaries(), arr.centers(), width, height, interpolate
    )
    return FlowField(uv)


def save_homography_array(path, arr: HomographyArray) -> None:
    """Write a homography array as a text file.

    Format: a header line "n_patches frame_height", then one 3x3 block per
    patch, row-major, three values per line, blocks separated by blank lines.
    """
    lines = [f"{arr.n_patches} {arr.frame_height}"]
    for mat in arr.mats:
        for row in mat:
            lines.append(" ".join(repr(float(v)) for v in row))
        lines.append("")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines))


def load_homography_array(path) -> HomographyArray:
    """Read a homography array written by save_homography_array."""
    with open(path, "r", encoding="ascii") as fh:
        tokens = []
        header = None
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                parts = line.split()
                if len(parts) != 2:
                    raise ValueError(f"{path}: bad homography array header {line!r}")
                header = (int(parts[0]), int(parts[1]))
                continue
            tokens.extend(float(tok) for tok in line.split())
    if header is None:
        raise ValueError(f"{path}: empty homography array file")
    n, frame_height = header
    if len(tokens) != n * 9:
        raise ValueError(
            f"{path}: expected {n * 9} matrix values, found {len(tokens)}"
        )
    mats = np.array(tokens, dtype=np.float64).reshape(n, 3, 3)
    return HomographyArray(mats, frame_height)
