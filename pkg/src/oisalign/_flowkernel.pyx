# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of the numpy flow-synthesis fallback.

Arithmetic mirrors oisalign.kernels._flow_numpy expression for expression so
the two backends agree to floating-point noise. Single-threaded on purpose:
callers parallelize across frame pairs, and identical results must not depend
on a thread count.
"""

import numpy as np

cimport numpy as cnp

from .errors import DegenerateWarpError

cnp.import_array()

DEF DENOM_EPS = 1e-12


def homography_array_flow(
    double[:, :, ::1] mats,
    cnp.int64_t[::1] bounds,
    double[::1] centers,
    int width,
    int height,
    bint interpolate,
):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out = np.empty(
        (height, width, 2), dtype=np.float64
    )
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t n = mats.shape[0]
    cdef Py_ssize_t i, j, x, y
    cdef double xf, yf, den, num_u, num_v, t, span
    cdef double h00, h01, h02, h10, h11, h12, h20, h21, h22
    cdef double g00, g01, g02, g10, g11, g12, g20, g21, g22
    cdef double ua, va, ub, vb

    if not interpolate:
        i = 0
        for y in range(height):
            while i + 1 < n and y >= bounds[i + 1]:
                i += 1
            h00 = mats[i, 0, 0]; h01 = mats[i, 0, 1]; h02 = mats[i, 0, 2]
            h10 = mats[i, 1, 0]; h11 = mats[i, 1, 1]; h12 = mats[i, 1, 2]
            h20 = mats[i, 2, 0]; h21 = mats[i, 2, 1]; h22 = mats[i, 2, 2]
            yf = <double> y
            for x in range(width):
                xf = <double> x
                den = h20 * xf + h21 * yf + h22
                if den <= DENOM_EPS and den >= -DENOM_EPS:
                    raise DegenerateWarpError(i, row=y)
                num_u = h00 * xf + h01 * yf + h02
                num_v = h10 * xf + h11 * yf + h12
                o[y, x, 0] = num_u / den - xf
                o[y, x, 1] = num_v / den - yf
        return out

    for y in range(height):
        yf = <double> y
        if yf < centers[0]:
            i = 0
            j = 0
            t = 0.0
        elif yf >= centers[n - 1]:
            i = n - 1
            j = n - 1
            t = 0.0
        else:
            i = 0
            while yf >= centers[i + 1]:
                i += 1
            j = i + 1
            span = centers[j] - centers[i]
            t = (yf - centers[i]) / span
        h00 = mats[i, 0, 0]; h01 = mats[i, 0, 1]; h02 = mats[i, 0, 2]
        h10 = mats[i, 1, 0]; h11 = mats[i, 1, 1]; h12 = mats[i, 1, 2]
        h20 = mats[i, 2, 0]; h21 = mats[i, 2, 1]; h22 = mats[i, 2, 2]
        g00 = mats[j, 0, 0]; g01 = mats[j, 0, 1]; g02 = mats[j, 0, 2]
        g10 = mats[j, 1, 0]; g11 = mats[j, 1, 1]; g12 = mats[j, 1, 2]
        g20 = mats[j, 2, 0]; g21 = mats[j, 2, 1]; g22 = mats[j, 2, 2]
        for x in range(width):
            xf = <double> x
            den = h20 * xf + h21 * yf + h22
            if den <= DENOM_EPS and den >= -DENOM_EPS:
                raise DegenerateWarpError(i, row=y)
            num_u = h00 * xf + h01 * yf + h02
            num_v = h10 * xf + h11 * yf + h12
            ua = num_u / den - xf
            va = num_v / den - yf
            if i == j:
                o[y, x, 0] = ua
                o[y, x, 1] = va
            else:
                den = g20 * xf + g21 * yf + g22
                if den <= DENOM_EPS and den >= -DENOM_EPS:
                    raise DegenerateWarpError(j, row=y)
                num_u = g00 * xf + g01 * yf + g02
                num_v = g10 * xf + g11 * yf + g12
                ub = num_u / den - xf
                vb = num_v / den - yf
                o[y, x, 0] = ua * (1.0 - t) + ub * t
                o[y, x, 1] = va * (1.0 - t) + vb * t
    return out
