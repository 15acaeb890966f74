"""Dense flow synthesis kernels.

Two interchangeable backends compute per-pixel flow from a per-patch
homography array: a compiled Cython extension (built at install time) and a
pure-numpy fallback. The compiled backend is selected at import when present;
setting ``OISALIGN_PURE=1`` in the environment forces the fallback. Both
backends are single-threaded so output is bit-identical no matter how callers
parallelize across frame pairs.

Both implementations evaluate, for a pixel (x, y) governed by homography H,

    d = h20*x + h21*y + h22
    u = (h00*x + h01*y + h02) / d - x
    v = (h10*x + h11*y + h12) / d - y

and raise DegenerateWarpError when |d| <= 1e-12. The optional interpolated
mode blends the flows of the two patches whose centers bracket the row.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import DegenerateWarpError

DENOM_EPS = 1e-12

try:
    from . import _flowkernel as _compiled
except ImportError:
    _compiled = None

if os.environ.get("OISALIGN_PURE"):
    _compiled = None

BACKEND = "compiled" if _compiled is not None else "numpy"


def _rows_flow(mat, ys, xs):
    """Flow of one homography over a block of rows.

    Args:
        mat: (3, 3) homography.
        ys: (r,) float row coordinates.
        xs: (w,) float column coordinates.

    Returns:
        (r, w, 2) flow block, or the offending row index if the denominator
        degenerates (returned as (None, row)).
    """
    yc = ys[:, None]
    den = mat[2, 0] * xs[None, :] + mat[2, 1] * yc + mat[2, 2]
    bad = np.abs(den) <= DENOM_EPS
    if np.any(bad):
        row = int(ys[np.argwhere(bad)[0][0]])
        return None, row
    u = (mat[0, 0] * xs[None, :] + mat[0, 1] * yc + mat[0, 2]) / den - xs[None, :]
    v = (mat[1, 0] * xs[None, :] + mat[1, 1] * yc + mat[1, 2]) / den - yc
    return np.stack([u, v], axis=2), -1


def _flow_numpy(mats, bounds, centers, width, height, interpolate):
    xs = np.arange(width, dtype=np.float64)
    out = np.empty((height, width, 2), dtype=np.float64)
    n = mats.shape[0]
    if not interpolate:
        for i in range(n):
            y0, y1 = int(bounds[i]), int(bounds[i + 1])
            if y1 <= y0:
                continue
            ys = np.arange(y0, y1, dtype=np.float64)
            block, bad_row = _rows_flow(mats[i], ys, xs)
            if block is None:
                raise DegenerateWarpError(i, row=bad_row)
            out[y0:y1] = block
        return out

    all_ys = np.arange(height, dtype=np.float64)
    # Rows at or beyond the outermost patch centers use that patch alone.
    segments = []
    first = all_ys < centers[0]
    last = all_ys >= centers[n - 1]
    if np.any(first):
        segments.append((0, 0, all_ys[first], None))
    for j in range(n - 1):
        sel = (all_ys >= centers[j]) & (all_ys < centers[j + 1])
        if np.any(sel):
            segments.append((j, j + 1, all_ys[sel], centers[j + 1] - centers[j]))
    if np.any(last):
        segments.append((n - 1, n - 1, all_ys[last], None))
    for ja, jb, ys, span in segments:
        block_a, bad_row = _rows_flow(mats[ja], ys, xs)
        if block_a is None:
            raise DegenerateWarpError(ja, row=bad_row)
        if ja == jb:
            blended = block_a
        else:
            block_b, bad_row = _rows_flow(mats[jb], ys, xs)
            if block_b is None:
                raise DegenerateWarpError(jb, row=bad_row)
            t = ((ys - centers[ja]) / span)[:, None, None]
            blended = block_a * (1.0 - t) + block_b * t
        out[ys.astype(np.int64)] = blended
    return out


def homography_array_flow(mats, bounds, centers, width, height, interpolate=False):
    """Synthesize a dense flow field from per-patch homographies.

    Args:
        mats: (n, 3, 3) float64 homographies, one per patch.
        bounds: (n + 1,) int64 row boundaries; patch i governs rows
            [bounds[i], bounds[i+1]).
        centers: (n,) float64 patch center rows, used in interpolated mode.
        width: raster width in pixels.
        height: raster height in pixels; must equal bounds[-1].
        interpolate: blend patch flows linearly across rows instead of the
            hard per-patch assignment.

    Returns:
        (height, width, 2) float64 flow array.

    Raises:
        DegenerateWarpError: if any required denominator is within 1e-12
            of zero.
    """
    mats = np.ascontiguousarray(mats, dtype=np.float64)
    bounds = np.ascontiguousarray(bounds, dtype=np.int64)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    if _compiled is not None:
        return _compiled.homography_array_flow(
            mats, bounds, centers, int(width), int(height), bool(interpolate)
        )
    return _flow_numpy(mats, bounds, centers, int(width), int(height), interpolate)
