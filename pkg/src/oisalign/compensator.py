"""Static per-patch correction between predicted and observed motion.

Gyro-predicted homography arrays miss whatever the lens does on its own.
Over a training set of pairs, each patch gets one left-multiplied 3x3
correction fitted in closed form (a Frobenius least-squares fit over the
normalized arrays), plus a global two-vector flow bias measured at the
image center. Applying the correction to a new gyro array yields the
corrected array and its flow plus bias.
"""

from __future__ import annotations

import json

from dataclasses import dataclass

import numpy as np

from .errors import CorrectionFitError
from .flowio import FlowField
from .geometry import HomographyArray, apply_homography, homography_array_to_flow

COND_LIMIT = 1e12


@dataclass(frozen=True)
class PatchCorrection:
    """Left corrections per patch plus a global flow bias in pixels."""

    mats: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        mats = np.asarray(self.mats, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64)
        if mats.ndim != 3 or mats.shape[1:] != (3, 3) or mats.shape[0] < 1:
            raise ValueError(f"mats must be (n, 3, 3); got {mats.shape}")
        if bias.shape != (2,):
            raise ValueError(f"bias must be (2,); got {bias.shape}")
        if not (np.all(np.isfinite(mats)) and np.all(np.isfinite(bias))):
            raise ValueError("correction must be finite")
        object.__setattr__(self, "mats", mats)
        object.__setattr__(self, "bias", bias)

    @property
    def n_patches(self) -> int:
        return self.mats.shape[0]


def _point_flow(arr: HomographyArray, point: np.ndarray) -> np.ndarray:
    patch = arr.patch_of_row(int(point[1]))
    mapped = apply_homography(arr.normalized().mats[patch], point[None, :])[0]
    return mapped - point


def fit_correction(pairs, width: int, height: int) -> PatchCorrection:
    """Fit per-patch corrections from (predicted, target) array pairs.

    Solves min_C sum_p ||C A_p - B_p||_F per patch over the normalized
    arrays (A predicted, B target), then measures the residual
    target-minus-corrected flow at the image center and stores its mean as
    the bias. Needs at least four pairs; a near-singular accumulation
    raises CorrectionFitError.
    """
    pairs = list(pairs)
    if len(pairs) < 4:
        raise CorrectionFitError(f"need at least 4 training pairs, got {len(pairs)}")
    if width < 1 or height < 1:
        raise ValueError("raster size must be positive")
    n = pairs[0][0].n_patches
    for pred, target in pairs:
        if pred.n_patches != n or target.n_patches != n:
            raise CorrectionFitError("training arrays disagree on patch count")
        if pred.frame_height != height or target.frame_height != height:
            raise CorrectionFitError("training arrays disagree with raster height")
    mats = np.empty((n, 3, 3))
    for i in range(n):
        gram = np.zeros((3, 3))
        cross = np.zeros((3, 3))
        for pred, target in pairs:
            a = pred.normalized().mats[i]
            b = target.normalized().mats[i]
            gram += a @ a.T
            cross += b @ a.T
        if np.linalg.cond(gram) > COND_LIMIT:
            raise CorrectionFitError(f"patch {i}: predicted arrays are degenerate")
        mats[i] = np.linalg.solve(gram, cross.T).T
    correction = PatchCorrection(mats=mats, bias=np.zeros(2))
    center = np.array([(width - 1) / 2.0, (height - 1) / 2.0])
    residuals = np.empty((len(pairs), 2))
    for p, (pred, target) in enumerate(pairs):
        corrected = apply_correction(correction, pred)
        residuals[p] = _point_flow(target, center) - _point_flow(corrected, center)
    return PatchCorrection(mats=mats, bias=residuals.mean(axis=0))


def apply_correction(correction: PatchCorrection, arr: HomographyArray) -> HomographyArray:
    """Left-multiply each patch and renormalize. Bias is not applied here."""
    if correction.n_patches != arr.n_patches:
        raise CorrectionFitError(
            f"correction covers {correction.n_patches} patches,"
            f" array has {arr.n_patches}"
        )
    mats = np.einsum("nij,njk->nik", correction.mats, arr.mats)
    return HomographyArray(mats, arr.frame_height).normalized()


def corrected_flow(
    correction: PatchCorrection,
    arr: HomographyArray,
    width: int,
    height: int,
    interpolate: bool = False,
) -> FlowField:
    """Flow of the corrected array with the bias added everywhere."""
    flow = homography_array_to_flow(
        apply_correction(correction, arr), width, height, interpolate=interpolate
    )
    return FlowField(flow.uv + correction.bias)


def save_correction(path, correction: PatchCorrection) -> None:
    payload = {
        "n_patches": correction.n_patches,
        "mats": [[float(v) for v in mat.reshape(-1)] for mat in correction.mats],
        "bias": [float(correction.bias[0]), float(correction.bias[1])],
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_correction(path) -> PatchCorrection:
    try:
        with open(path, "r", encoding="ascii") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CorrectionFitError(f"{path}: {exc}") from exc
    try:
        mats = np.asarray(payload["mats"], dtype=np.float64).reshape(
            payload["n_patches"], 3, 3
        )
        bias = np.asarray(payload["bias"], dtype=np.float64)
    except (KeyError, ValueError, TypeError) as exc:
        raise CorrectionFitError(f"{path}: malformed correction file: {exc}") from exc
    return PatchCorrection(mats=mats, bias=bias)
