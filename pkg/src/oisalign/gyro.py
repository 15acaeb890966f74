"""Gyroscope log handling and rotation integration.

Log format: CSV lines ``t_ns,omega_x,omega_y,omega_z`` with integer
nanosecond timestamps (strictly increasing) and rates in rad/s. Timestamps
are converted to float seconds at parse time. Frame stamps use
``frame_index,t_start_ns``.

Angular velocity between samples is interpolated linearly and integrated
per sub-interval with the midpoint rate, so each step is third-order
accurate. Outside the sampled range the rate is held at the nearest sample
(zero-order hold); a CoverageWarning is emitted when the requested interval
extends more than two sample periods beyond the log.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    CoverageWarning,
    FrameStampError,
    GyroCoverageError,
    GyroLogError,
)
from .flowio import FlowField
from .geometry import (
    CameraIntrinsics,
    HomographyArray,
    homography_array_to_flow,
    normalize_homography,
    rodrigues,
)

NS_PER_S = 1_000_000_000


def ns_to_seconds(t_ns: int) -> float:
    """Shared nanosecond-to-second conversion (keeps parse paths bit-equal)."""
    return t_ns / NS_PER_S


def seconds_to_ns(t: float) -> int:
    return int(round(t * NS_PER_S))


@dataclass(frozen=True)
class GyroSample:
    """One gyroscope reading: time in seconds, body rate in rad/s."""

    t: float
    omega: np.ndarray

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=np.float64)
        if omega.shape != (3,) or not np.all(np.isfinite(omega)):
            raise ValueError("omega must be a finite 3-vector")
        object.__setattr__(self, "omega", omega)


@dataclass(frozen=True)
class RsTiming:
    """Rolling-shutter timing: readout span, frame period, patch count.

    t_s == 0 is the global-shutter limit; t_s must stay below the frame
    period t_f.
    """

    t_s: float
    t_f: float
    n_patches: int

    def __post_init__(self):
        if not (np.isfinite(self.t_s) and np.isfinite(self.t_f)):
            raise ValueError("timing values must be finite")
        if self.t_f <= 0:
            raise ValueError("frame period must be positive")
        if not 0.0 <= self.t_s < self.t_f:
            raise ValueError(
                f"readout time must satisfy 0 <= t_s < t_f, got "
                f"t_s={self.t_s}, t_f={self.t_f}"
            )
        if int(self.n_patches) < 1:
            raise ValueError("patch count must be at least 1")
        object.__setattr__(self, "n_patches", int(self.n_patches))


@dataclass(frozen=True)
class FrameStamp:
    """Frame index plus exposure start time of its first row, in seconds."""

    index: int
    t_start: float

    def __post_init__(self):
        if not np.isfinite(self.t_start):
            raise ValueError("frame start time must be finite")
        object.__setattr__(self, "index", int(self.index))


def parse_gyro_log(source) -> list[GyroSample]:
    """Parse a gyro log from a path or an iterable of lines.

    Returns an empty list for an empty log. Raises GyroLogError with a line
    number for malformed fields or non-monotonic timestamps.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "r", encoding="ascii") as fh:
            return parse_gyro_log(fh)
    samples: list[GyroSample] = []
    last_ns = None
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise GyroLogError(
                f"expected 4 comma-separated fields, got {len(parts)}", line=lineno
            )
        try:
            t_ns = int(parts[0])
            omega = np.array([float(p) for p in parts[1:]], dtype=np.float64)
        except ValueError as exc:
            raise GyroLogError(f"unparseable value ({exc})", line=lineno) from None
        if not np.all(np.isfinite(omega)):
            raise GyroLogError("non-finite angular rate", line=lineno)
        if last_ns is not None and t_ns <= last_ns:
            raise GyroLogError(
                f"non-monotonic timestamp {t_ns} after {last_ns}", line=lineno
            )
        last_ns = t_ns
        samples.append(GyroSample(ns_to_seconds(t_ns), omega))
    return samples


def format_gyro_log(times_ns, omegas) -> str:
    """Render samples as log text (full float precision, round-trip exact)."""
    lines = []
    for t_ns, omega in zip(times_ns, omegas):
        lines.append(
            f"{int(t_ns)},{float(omega[0])!r},{float(omega[1])!r},{float(omega[2])!r}"
        )
    return "\n".join(lines) + ("\n" if lines else "")


def parse_frame_stamps(source) -> list[FrameStamp]:
    """Parse ``frame_index,t_start_ns`` lines from a path or line iterable."""
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "r", encoding="ascii") as fh:
            return parse_frame_stamps(fh)
    stamps: list[FrameStamp] = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise FrameStampError(
                f"expected 2 comma-separated fields, got {len(parts)}", line=lineno
            )
        try:
            idx = int(parts[0])
            t_ns = int(parts[1])
        except ValueError as exc:
            raise FrameStampError(f"unparseable value ({exc})", line=lineno) from None
        if stamps and (idx <= stamps[-1].index or ns_to_seconds(t_ns) <= stamps[-1].t_start):
            raise FrameStampError(
                "frame indices and start times must both increase", line=lineno
            )
        stamps.append(FrameStamp(idx, ns_to_seconds(t_ns)))
    return stamps


def format_frame_stamps(stamps) -> str:
    lines = [f"{s.index},{seconds_to_ns(s.t_start)}" for s in stamps]
    return "\n".join(lines) + ("\n" if lines else "")


def patch_exposure_times(
    frame: FrameStamp, timing: RsTiming, patch: int
) -> tuple[float, float]:
    """Exposure start of patch ``patch`` in this frame and in the next.

    Patch i of a frame starting at t begins exposing at t + t_s * i / n; the
    matching patch of the following frame starts one frame period later.
    """
    if not 0 <= patch < timing.n_patches:
        raise ValueError(
            f"patch {patch} outside [0, {timing.n_patches})"
        )
    t_a = frame.t_start + timing.t_s * patch / timing.n_patches
    return t_a, t_a + timing.t_f


def _interp_rates(samples_t, samples_w, queries):
    out = np.empty((len(queries), 3))
    for c in range(3):
        out[:, c] = np.interp(queries, samples_t, samples_w[:, c])
    return out


SUBSTEPS_PER_INTERVAL = 4


def _anchored_pieces(ts, t0, t1):
    """Split [t0, t1] along substep edges anchored to the sample grid.

    Each sample interval carries a fixed subdivision into
    SUBSTEPS_PER_INTERVAL equal substeps, and every returned piece lies
    inside exactly one substep. The third element of each piece is that
    substep's own midpoint, so a query split at any interior time hands
    both halves the same rate vector: their rotation increments share an
    axis and compose back to the unsplit increment exactly.
    """
    m_sub = SUBSTEPS_PER_INTERVAL
    n = len(ts)
    edges = {t0, t1}
    for k in range(n - 1):
        lo, hi = ts[k], ts[k + 1]
        if hi <= t0 or lo >= t1:
            continue
        step = (hi - lo) / m_sub
        for j in range(m_sub + 1):
            e = hi if j == m_sub else lo + j * step
            if t0 < e < t1:
                edges.add(e)
    order = sorted(edges)
    pieces = []
    for a, b in zip(order[:-1], order[1:]):
        mid = 0.5 * (a + b)
        if n >= 2 and ts[0] < mid < ts[-1]:
            k = min(max(int(np.searchsorted(ts, mid, side="right")) - 1, 0), n - 2)
            lo, hi = ts[k], ts[k + 1]
            step = (hi - lo) / m_sub
            j = min(max(int((mid - lo) / step), 0), m_sub - 1)
            sub_hi = hi if j == m_sub - 1 else lo + (j + 1) * step
            mid = 0.5 * ((lo + j * step) + sub_hi)
        pieces.append((a, b, mid))
    return pieces


def integrate_rotation(
    samples: list[GyroSample],
    t0: float,
    t1: float,
    axis_map: np.ndarray | None = None,
) -> np.ndarray:
    """Accumulated rotation over [t0, t1] from sampled rates.

    Returns R such that a ray expressed in the camera frame at t0 maps to
    the camera frame at t1 via R. Later increments multiply on the left, so
    integrate(s, t1, t2) @ integrate(s, t0, t1) == integrate(s, t0, t2).

    Args:
        samples: gyro readings ordered by time.
        t0: interval start, seconds.
        t1: interval end, seconds; must satisfy t1 >= t0.
        axis_map: optional 3x3 signed permutation mapping gyro axes into
            camera axes; identity when omitted.

    Raises:
        GyroCoverageError: when the sample list is empty.
        ValueError: when t1 < t0.
    """
    if len(samples) == 0:
        raise GyroCoverageError("cannot integrate: no gyro samples")
    if t1 < t0:
        raise ValueError(f"invalid interval: t0={t0} > t1={t1}")
    if t1 == t0:
        return np.eye(3)
    ts = np.array([s.t for s in samples])
    ws = np.stack([s.omega for s in samples])
    if axis_map is not None:
        axis_map = np.asarray(axis_map, dtype=np.float64)
        if axis_map.shape != (3, 3):
            raise ValueError("axis map must be 3x3")
        ws = ws @ axis_map.T

    if len(samples) >= 2:
        period = float(np.median(np.diff(ts)))
        worst_gap = max(ts[0] - t0, t1 - ts[-1])
        if worst_gap > 2.0 * period:
            warnings.warn(
                f"integration interval extends {worst_gap:.6g} s beyond gyro "
                f"coverage (sample period {period:.6g} s); holding end rates",
                CoverageWarning,
                stacklevel=2,
            )

    pieces = _anchored_pieces(ts, t0, t1)
    mids = _interp_rates(ts, ws, np.array([p[2] for p in pieces]))
    # Constant midpoint rate per anchored substep; increments compose
    # left-to-right in time, so later rotations multiply on the left.
    r = np.eye(3)
    for (a, b, _), w in zip(pieces, mids):
        r = rodrigues(w * (b - a)) @ r
    return r


def gyro_homography_array(
    samples: list[GyroSample],
    frame_a: FrameStamp,
    frame_b: FrameStamp,
    timing: RsTiming,
    intr: CameraIntrinsics,
    frame_height: int,
    axis_map: np.ndarray | None = None,
) -> HomographyArray:
    """Per-patch gyro homographies warping frame_a onto frame_b.

    Patch i integrates the gyro over [ta(i), tb(i)] with ta(i) anchored at
    frame_a and tb(i) at frame_b, then conjugates by the intrinsics:
    H_i = K @ R_i @ K^-1.
    """
    if frame_b.t_start <= frame_a.t_start:
        raise ValueError("frame_b must start after frame_a")
    n = timing.n_patches
    k = intr.matrix
    k_inv = intr.inverse
    mats = np.empty((n, 3, 3))
    for i in range(n):
        t_a = frame_a.t_start + timing.t_s * i / n
        t_b = frame_b.t_start + timing.t_s * i / n
        r = integrate_rotation(samples, t_a, t_b, axis_map=axis_map)
        mats[i] = normalize_homography(k @ r @ k_inv)
    return HomographyArray(mats, frame_height)


def gyro_flow(
    samples: list[GyroSample],
    frame_a: FrameStamp,
    frame_b: FrameStamp,
    timing: RsTiming,
    intr: CameraIntrinsics,
    width: int,
    height: int,
    axis_map: np.ndarray | None = None,
    interpolate: bool = False,
) -> FlowField:
    """Dense gyro-predicted forward flow from frame_a to frame_b."""
    arr = gyro_homography_array(
        samples, frame_a, frame_b, timing, intr, height, axis_map=axis_map
    )
    return homography_array_to_flow(arr, width, height, interpolate=interpolate)
