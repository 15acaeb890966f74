"""Row-blended fundamental matrix estimation for rolling-shutter pairs.

A global shutter pair admits one fundamental matrix; a rolling-shutter pair
does not, because every row is exposed at its own time. This module fits one
fundamental matrix per row patch and couples them through soft row weights,
so every correspondence constrains every patch in proportion to how close
its source row sits to the patch center.

Conventions, fixed across the package:

* Correspondences are rows ``(x1, y1, x2, y2)``: a point in frame a and its
  match in frame b.
* A patch matrix F satisfies ``p1^T F p2 = 0`` with ``p1 = (x1, y1, 1)`` and
  ``p2 = (x2, y2, 1)``. The transpose of the usual two-view arrangement; it
  keeps the weighting attached to the first frame's rows. ``F.T`` is the
  conventional matrix mapping frame-a points to frame-b epipolar lines.
* The stacked unknown vector lists each patch matrix column by column, so a
  constraint row dotted with it reproduces ``p1^T F_i p2`` exactly.
* Patch i of n covers source rows [i h / n, (i + 1) h / n); its weight
  center is (i + 0.5) h / n. Weights are a softmax of squared row distance
  with bandwidth ``sigma`` pixels: small sigma makes hard per-patch
  assignment, larger sigma blends neighbors.

Patches whose support is too thin to stand alone (fewer than eight
correspondences carrying their largest weight) are tied to a neighbor with
unit-scale smoothness rows; the scale matches the Hartley-normalized
constraint rows assembled by ``estimate_mixture``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    AmbiguousSolutionError,
    CheiralityError,
    CorrespondenceError,
    DegeneracyWarning,
    RankDeficiencyError,
)
from .flowio import FlowField
from .geometry import (
    CameraIntrinsics,
    HomographyArray,
    homography_array_to_flow,
    normalize_homography,
)

MIN_PATCH_SUPPORT = 8
AMBIGUITY_RTOL = 1e-10
DEGENERACY_RATIO = 1e3


def _as_corrs(corrs) -> np.ndarray:
    arr = np.asarray(corrs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise CorrespondenceError(
            f"correspondences must be (n, 4) (x1, y1, x2, y2); got {arr.shape}"
        )
    if arr.shape[0] == 0:
        raise CorrespondenceError("need at least one correspondence")
    if not np.all(np.isfinite(arr)):
        raise CorrespondenceError("correspondences must be finite")
    return arr


def patch_centers(n_patches: int, frame_height: float) -> np.ndarray:
    return (np.arange(n_patches) + 0.5) * (frame_height / n_patches)


def mixture_weights(ys, n_patches: int, frame_height: float, sigma: float) -> np.ndarray:
    """Soft patch weights for source rows ``ys``.

    Returns (m, n_patches) rows summing to one: the softmax over patches of
    ``-(y - c_i)^2 / (2 sigma^2)``. Computed against the running maximum so
    tiny sigma underflows to exact one-hot rows instead of NaN.
    """
    if n_patches < 1:
        raise ValueError("need at least one patch")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    ys = np.atleast_1d(np.asarray(ys, dtype=np.float64))
    centers = patch_centers(n_patches, frame_height)
    logits = -((ys[:, None] - centers[None, :]) ** 2) / (2.0 * sigma * sigma)
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    return w / w.sum(axis=1, keepdims=True)


def dlt_row(p1, p2) -> np.ndarray:
    """Constraint row(s) such that ``row . vec(F) = p1^T F p2``.

    vec(F) stacks F column by column. Accepts single points (2,) or batches
    (m, 2); returns (9,) or (m, 9).
    """
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    single = p1.ndim == 1
    p1 = np.atleast_2d(p1)
    p2 = np.atleast_2d(p2)
    x1, y1 = p1[:, 0], p1[:, 1]
    x2, y2 = p2[:, 0], p2[:, 1]
    one = np.ones_like(x1)
    rows = np.stack(
        [x2 * x1, x2 * y1, x2, y2 * x1, y2 * y1, y2, x1, y1, one], axis=1
    )
    return rows[0] if single else rows


def assemble_mixture_system(
    corrs,
    n_patches: int,
    frame_height: float,
    sigma: float,
    lam: float = 1.0,
    weight_ys=None,
) -> np.ndarray:
    """Build the homogeneous system whose null vector stacks the patches.

    One row per correspondence: its 9-entry constraint row scaled by each
    patch weight, laid out patch after patch (width 9 n_patches). Patches
    with fewer than MIN_PATCH_SUPPORT dominant correspondences get nine
    smoothness rows ``lam (f_i - f_neighbor) = 0`` tying them to the
    previous patch (patch 0 ties to patch 1).

    weight_ys overrides the rows used for weighting; estimate_mixture passes
    the raw pixel rows here while the constraint rows use normalized
    coordinates.
    """
    corrs = _as_corrs(corrs)
    ys = corrs[:, 1] if weight_ys is None else np.asarray(weight_ys, dtype=np.float64)
    if ys.shape[0] != corrs.shape[0]:
        raise CorrespondenceError("weight_ys length must match correspondences")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    weights = mixture_weights(ys, n_patches, frame_height, sigma)
    base = dlt_row(corrs[:, 0:2], corrs[:, 2:4])
    data = weights[:, :, None] * base[:, None, :]
    blocks = [data.reshape(corrs.shape[0], 9 * n_patches)]
    if n_patches > 1 and lam > 0:
        dominant = np.argmax(weights, axis=1)
        support = np.bincount(dominant, minlength=n_patches)
        eye9 = np.eye(9)
        for i in range(n_patches):
            if support[i] >= MIN_PATCH_SUPPORT:
                continue
            neighbor = 1 if i == 0 else i - 1
            tie = np.zeros((9, 9 * n_patches))
            tie[:, 9 * i : 9 * i + 9] = lam * eye9
            tie[:, 9 * neighbor : 9 * neighbor + 9] = -lam * eye9
            blocks.append(tie)
    return np.vstack(blocks)


def solve_mixture(a: np.ndarray, n_patches: int) -> np.ndarray:
    """Extract the unit-norm null vector of the assembled system.

    Returns (n_patches, 3, 3) patch matrices, each projected to rank 2,
    jointly rescaled to unit stacked norm with the largest entry positive.
    Raises RankDeficiencyError when the system cannot pin down a
    one-dimensional null space by row count, AmbiguousSolutionError when the
    null space is effectively larger, and emits DegeneracyWarning when the
    two smallest singular values are within DEGENERACY_RATIO of each other.
    """
    a = np.asarray(a, dtype=np.float64)
    width = 9 * n_patches
    if a.ndim != 2 or a.shape[1] != width:
        raise ValueError(f"system must have width {width}; got {a.shape}")
    if a.shape[0] < width - 1:
        raise RankDeficiencyError(
            f"{a.shape[0]} rows cannot determine {width} unknowns up to scale"
            f" (need at least {width - 1})"
        )
    _, s, vt = np.linalg.svd(a, full_matrices=True)
    # Fewer rows than unknowns leaves implicit zero singular values; pad so
    # the checks always look at sigma_{9N-1} and sigma_{9N}.
    sig = np.zeros(width)
    sig[: s.shape[0]] = s
    if sig[-2] < AMBIGUITY_RTOL * sig[0]:
        raise AmbiguousSolutionError(
            "null space is at least two-dimensional"
            f" (second-smallest singular value {sig[-2]:.3g})"
        )
    ratio = sig[-2] / max(sig[-1], np.finfo(np.float64).tiny)
    if ratio <= DEGENERACY_RATIO:
        warnings.warn(
            f"smallest singular values poorly separated (ratio {ratio:.3g});"
            " the estimate may be unstable",
            DegeneracyWarning,
            stacklevel=2,
        )
    f = vt[-1]
    mats = f.reshape(n_patches, 3, 3).transpose(0, 2, 1).copy()
    # Rank-2 projection happens here, in the same (possibly normalized)
    # coordinates the system was assembled in; invertible denormalization
    # preserves rank afterwards.
    for i in range(n_patches):
        u, sv, vt_i = np.linalg.svd(mats[i])
        mats[i] = (u * np.array([sv[0], sv[1], 0.0])) @ vt_i
    return _unit_stack(mats)


def _unit_stack(mats: np.ndarray) -> np.ndarray:
    """Scale so the stacked vector has unit norm and largest entry positive."""
    flat = mats.reshape(-1)
    norm = np.linalg.norm(flat)
    if norm < 1e-15:
        raise AmbiguousSolutionError("solution collapsed to zero")
    flat = flat / norm
    peak = np.argmax(np.abs(flat))
    if flat[peak] < 0:
        flat = -flat
    return flat.reshape(mats.shape)


@dataclass(frozen=True)
class FundamentalMixture:
    """Per-patch fundamental matrices plus the weighting geometry.

    mats: (n_patches, 3, 3) in the ``p1^T F p2 = 0`` arrangement, scaled so
    that the stacked vector has unit norm.
    """

    mats: np.ndarray
    frame_height: int
    sigma: float

    def __post_init__(self):
        mats = np.asarray(self.mats, dtype=np.float64)
        if mats.ndim != 3 or mats.shape[1:] != (3, 3) or mats.shape[0] < 1:
            raise ValueError(f"mats must be (n, 3, 3); got {mats.shape}")
        if not np.all(np.isfinite(mats)):
            raise ValueError("mats must be finite")
        if int(self.frame_height) < 1 or self.sigma <= 0:
            raise ValueError("frame_height and sigma must be positive")
        object.__setattr__(self, "mats", mats)
        object.__setattr__(self, "frame_height", int(self.frame_height))
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def n_patches(self) -> int:
        return self.mats.shape[0]

    def weights_at(self, ys) -> np.ndarray:
        return mixture_weights(ys, self.n_patches, self.frame_height, self.sigma)

    def at_rows(self, ys) -> np.ndarray:
        """Blended matrices sum_i w_i(y) F_i, shape (m, 3, 3)."""
        w = self.weights_at(ys)
        return np.einsum("mi,ijk->mjk", w, self.mats)


def default_sigma(frame_height: float) -> float:
    # Near-hard assignment: each correspondence constrains its own patch.
    return 1e-3 * frame_height


def _hartley_transform(points: np.ndarray) -> np.ndarray:
    centroid = points.mean(axis=0)
    dist = np.linalg.norm(points - centroid, axis=1).mean()
    if dist < 1e-12:
        raise CorrespondenceError("correspondence points are all coincident")
    s = np.sqrt(2.0) / dist
    return np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )


def estimate_mixture(
    corrs,
    n_patches: int,
    frame_height: int,
    sigma: float | None = None,
    lam: float = 1.0,
) -> FundamentalMixture:
    """Fit a fundamental mixture to correspondences.

    Both point sets are Hartley-normalized before assembly (the weights
    still see raw source rows); the rank-2-projected solve result is
    denormalized patch by patch and rescaled to unit norm with its largest
    entry positive.
    """
    corrs = _as_corrs(corrs)
    if sigma is None:
        sigma = default_sigma(frame_height)
    t1 = _hartley_transform(corrs[:, 0:2])
    t2 = _hartley_transform(corrs[:, 2:4])
    hat = np.empty_like(corrs)
    hat[:, 0:2] = corrs[:, 0:2] * t1[0, 0] + t1[0:2, 2]
    hat[:, 2:4] = corrs[:, 2:4] * t2[0, 0] + t2[0:2, 2]
    a = assemble_mixture_system(
        hat, n_patches, frame_height, sigma, lam=lam, weight_ys=corrs[:, 1]
    )
    mats_hat = solve_mixture(a, n_patches)
    mats = np.einsum("ji,njk,kl->nil", t1, mats_hat, t2)
    return FundamentalMixture(
        mats=_unit_stack(mats), frame_height=frame_height, sigma=sigma
    )


def epipolar_residual(mixture: FundamentalMixture, corrs) -> float:
    """Mean |p1^T F(y1) p2| over the correspondences."""
    corrs = _as_corrs(corrs)
    mats = mixture.at_rows(corrs[:, 1])
    p1 = np.column_stack([corrs[:, 0:2], np.ones(corrs.shape[0])])
    p2 = np.column_stack([corrs[:, 2:4], np.ones(corrs.shape[0])])
    vals = np.einsum("mi,mij,mj->m", p1, mats, p2)
    return float(np.mean(np.abs(vals)))


def essential_from_fundamental(f_std: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    """Essential matrix from a conventional fundamental matrix.

    f_std satisfies ``x2^T F x1 = 0`` (note: transpose a patch matrix from a
    FundamentalMixture before calling). The result is projected onto the
    essential manifold by averaging its two leading singular values.
    """
    k = intr.matrix
    e = k.T @ np.asarray(f_std, dtype=np.float64) @ k
    u, s, vt = np.linalg.svd(e)
    mean = 0.5 * (s[0] + s[1])
    if mean < 1e-12:
        warnings.warn(
            "essential matrix vanishes; the fundamental input is degenerate",
            DegeneracyWarning,
            stacklevel=2,
        )
    return (u * np.array([mean, mean, 0.0])) @ vt


def _triangulate_depths(r, t, x1, x2):
    """Depths in both cameras for normalized correspondences.

    Linear triangulation with P1 = [I | 0], P2 = [r | t]; returns (m, 2)
    depths (camera a, camera b).
    """
    p2 = np.hstack([r, t[:, None]])
    m = x1.shape[0]
    depths = np.empty((m, 2))
    for j in range(m):
        amat = np.empty((4, 4))
        amat[0] = [-1.0, 0.0, x1[j, 0], 0.0]
        amat[1] = [0.0, -1.0, x1[j, 1], 0.0]
        amat[2] = x2[j, 0] * p2[2] - p2[0]
        amat[3] = x2[j, 1] * p2[2] - p2[1]
        _, _, vt = np.linalg.svd(amat)
        xh = vt[-1]
        if abs(xh[3]) < 1e-15:
            depths[j] = 0.0
            continue
        xw = xh[:3] / xh[3]
        depths[j, 0] = xw[2]
        depths[j, 1] = (r @ xw + t)[2]
    return depths


def rotation_from_essential(e: np.ndarray, points1, points2, intr: CameraIntrinsics):
    """Recover (R, t) with ``x2 ~ R x1 + t`` from an essential matrix.

    points1/points2 are (m, 2) pixel correspondences used only to settle the
    four-fold ambiguity: the candidate placing the most points in front of
    both cameras wins, and a strict majority is required. t has unit norm
    and its scale is unobservable.
    """
    e = np.asarray(e, dtype=np.float64)
    u, _, vt = np.linalg.svd(e)
    if np.linalg.det(u) < 0:
        u = -u
    if np.linalg.det(vt) < 0:
        vt = -vt
    w = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    p1 = np.asarray(points1, dtype=np.float64)
    p2 = np.asarray(points2, dtype=np.float64)
    if p1.shape != p2.shape or p1.ndim != 2 or p1.shape[1] != 2 or p1.shape[0] < 1:
        raise ValueError("need matching (m, 2) point arrays")
    kinv = intr.inverse
    ones = np.ones((p1.shape[0], 1))
    x1 = np.hstack([p1, ones]) @ kinv.T
    x2 = np.hstack([p2, ones]) @ kinv.T
    x1 = x1[:, :2] / x1[:, 2:3]
    x2 = x2[:, :2] / x2[:, 2:3]
    best = None
    best_count = -1
    for r in (u @ w @ vt, u @ w.T @ vt):
        for tvec in (u[:, 2], -u[:, 2]):
            depths = _triangulate_depths(r, tvec, x1, x2)
            count = int(np.sum((depths[:, 0] > 0) & (depths[:, 1] > 0)))
            if count > best_count:
                best_count = count
                best = (r, tvec)
    if best_count <= p1.shape[0] // 2:
        raise CheiralityError(
            f"best candidate puts only {best_count} of {p1.shape[0]} points"
            " in front of both cameras"
        )
    return best[0].copy(), best[1].copy()


def mixture_to_homography_array(
    mixture: FundamentalMixture, corrs, intr: CameraIntrinsics
) -> HomographyArray:
    """Rotation-only per-patch homographies decomposed from the mixture.

    Each patch matrix is converted to an essential matrix and decomposed;
    the cheirality vote for patch i uses the correspondences whose largest
    weight falls on patch i, or all of them when fewer than
    MIN_PATCH_SUPPORT do. The translation component is discarded, which is
    exactly the alignment target: parallax is content, not shake.
    """
    corrs = _as_corrs(corrs)
    weights = mixture.weights_at(corrs[:, 1])
    dominant = np.argmax(weights, axis=1)
    k = intr.matrix
    kinv = intr.inverse
    mats = np.empty((mixture.n_patches, 3, 3))
    for i in range(mixture.n_patches):
        sel = dominant == i
        if int(np.sum(sel)) < MIN_PATCH_SUPPORT:
            sel = slice(None)
        e = essential_from_fundamental(mixture.mats[i].T, intr)
        r, _ = rotation_from_essential(e, corrs[sel, 0:2], corrs[sel, 2:4], intr)
        mats[i] = normalize_homography(k @ r @ kinv)
    return HomographyArray(mats, mixture.frame_height)


def mixture_rotation_flow(
    mixture: FundamentalMixture,
    corrs,
    intr: CameraIntrinsics,
    width: int,
    height: int,
    interpolate: bool = False,
) -> FlowField:
    """Dense rotation-only flow implied by the mixture."""
    arr = mixture_to_homography_array(mixture, corrs, intr)
    return homography_array_to_flow(arr, width, height, interpolate=interpolate)


def save_correspondences(path, corrs) -> None:
    """Write ``x1,y1,x2,y2`` CSV lines; floats round-trip exactly."""
    corrs = _as_corrs(corrs)
    with open(path, "w", encoding="ascii") as fh:
        for row in corrs:
            fh.write(
                f"{float(row[0])!r},{float(row[1])!r},{float(row[2])!r},{float(row[3])!r}\n"
            )


def load_correspondences(path) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split(",")
            if len(parts) != 4:
                raise CorrespondenceError(
                    f"expected 4 comma-separated values, got {len(parts)}", line=lineno
                )
            try:
                vals = [float(p) for p in parts]
            except ValueError as exc:
                raise CorrespondenceError(str(exc), line=lineno) from exc
            if not all(np.isfinite(v) for v in vals):
                raise CorrespondenceError("values must be finite", line=lineno)
            rows.append(vals)
    if not rows:
        raise CorrespondenceError(f"{path}: no correspondences found")
    return np.asarray(rows, dtype=np.float64)


def save_mixture(path, mixture: FundamentalMixture) -> None:
    """Text dump: header ``n_patches frame_height sigma``, then 3x3 blocks."""
    lines = [f"{mixture.n_patches} {mixture.frame_height} {float(mixture.sigma)!r}"]
    for mat in mixture.mats:
        lines.append("")
        for row in mat:
            lines.append(f"{float(row[0])!r} {float(row[1])!r} {float(row[2])!r}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mixture(path) -> FundamentalMixture:
    values = []
    header = None
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if header is None:
                if len(parts) != 3:
                    raise CorrespondenceError(
                        f"{path}:{lineno}: header must be 'n_patches frame_height sigma'"
                    )
                header = (int(parts[0]), int(parts[1]), float(parts[2]))
                continue
            if len(parts) != 3:
                raise CorrespondenceError(
                    f"{path}:{lineno}: expected 3 values per matrix row"
                )
            values.extend(float(p) for p in parts)
    if header is None:
        raise CorrespondenceError(f"{path}: empty mixture file")
    n, h, sigma = header
    mats = np.asarray(values, dtype=np.float64)
    if mats.size != 9 * n:
        raise CorrespondenceError(
            f"{path}: expected {9 * n} matrix entries, found {mats.size}"
        )
    return FundamentalMixture(mats=mats.reshape(n, 3, 3), frame_height=h, sigma=sigma)
