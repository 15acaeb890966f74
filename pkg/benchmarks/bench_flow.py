"""Timing comparison of the flow-synthesis backends.

Runs the compiled extension and the numpy fallback on identical inputs,
checks that they agree to rounding, and prints per-size timings. Invoke as

    python3 benchmarks/bench_flow.py [--repeats N] [--sizes WxH,WxH,...]
"""

import argparse
import sys
import time

import numpy as np

from oisalign.geometry import CameraIntrinsics, rodrigues
from oisalign.kernels import _compiled, _flow_numpy, homography_array_flow

N_PATCHES = 6


def patch_inputs(width, height, seed=0):
    """Realistic per-patch warps: small rotations conjugated by intrinsics."""
    rng = np.random.default_rng(seed)
    intr = CameraIntrinsics(
        fx=0.9 * width, fy=0.9 * width, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0
    )
    k = intr.matrix
    k_inv = np.linalg.inv(k)
    mats = np.stack(
        [k @ rodrigues(rng.normal(scale=0.01, size=3)) @ k_inv for _ in range(N_PATCHES)]
    )
    bounds = np.round(np.linspace(0, height, N_PATCHES + 1)).astype(np.int64)
    centers = (bounds[:-1] + bounds[1:] - 1) / 2.0
    return mats, bounds, centers


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--sizes", default="640x480,1280x720,1920x1080")
    args = parser.parse_args(argv)

    if _compiled is None:
        print("compiled backend unavailable (OISALIGN_PURE set or build missing); "
              "timing the numpy fallback only", file=sys.stderr)

    header = f"{'size':>10} {'mode':>12} {'numpy ms':>10}"
    if _compiled is not None:
        header += f" {'compiled ms':>12} {'speedup':>8} {'max |diff|':>11}"
    print(header)

    for size in args.sizes.split(","):
        width, height = (int(v) for v in size.lower().split("x"))
        mats, bounds, centers = patch_inputs(width, height)
        for interpolate in (False, True):
            mode = "interpolate" if interpolate else "hard"
            t_numpy = best_of(
                lambda: _flow_numpy(mats, bounds, centers, width, height, interpolate),
                args.repeats,
            )
            row = f"{size:>10} {mode:>12} {t_numpy * 1e3:>10.2f}"
            if _compiled is not None:
                t_comp = best_of(
                    lambda: _compiled.homography_array_flow(
                        mats, bounds, centers, width, height, interpolate
                    ),
                    args.repeats,
                )
                a = homography_array_flow(
                    mats, bounds, centers, width, height, interpolate
                )
                b = _flow_numpy(mats, bounds, centers, width, height, interpolate)
                diff = float(np.max(np.abs(a - b)))
                row += (f" {t_comp * 1e3:>12.2f} {t_numpy / t_comp:>7.1f}x"
                        f" {diff:>11.2e}")
            print(row)
    return 0


if __name__ == "__main__":
    sys.exit(main())
