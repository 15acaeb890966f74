"""Rolling-shutter sequence simulator.

Produces, per consecutive frame pair: the gyro-predicted flow (through the
same code path the estimator uses on parsed logs), an exact rotation-only
ground-truth flow, an exact full-motion flow (translation plus lens shift),
exact correspondences, per-patch ground-truth homography arrays, and
"observed" arrays with the inter-frame lens-shift differential folded in.

Model conventions:

* World-to-camera orientation R(t) starts at identity and advances by
  left-multiplying rodrigues(omega(t) dt); the gyro log records omega(t)
  plus optional white noise. Orientation is integrated once on a fine grid
  (t_f / 2000 per step) and queried with one extra midpoint step, so oracle
  rotations are exact to well below 1e-9 rad.
* Row y of a frame starting at t exposes at tau = t + t_s * y / h. The
  matching content in the next frame is evaluated at tau + t_f (same row
  fraction), mirroring the per-patch motion model the estimators use.
* The lens shift s(t) enters differentially: dense full-motion flow is the
  base flow plus s(tau + t_f) - s(tau) at the source row, and stored
  correspondences carry the same differential on the second point. The
  common-mode part of a lens shift is unobservable for alignment.
* The scene is a smooth non-planar depth surface z = g(x, y); correspondence
  points are sampled on it and dense full-motion flow intersects pixel rays
  with it, so correspondences lie exactly on the flow while fundamental
  estimation stays well-posed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RsCameraModel, save_camera_config
from .errors import OisAlignError
from .evaluate import AnnotationPair, save_annotation
from .flowio import FlowField, write_flo
from .geometry import HomographyArray, normalize_homography, rodrigues_many, save_homography_array
from .gyro import (
    FrameStamp,
    GyroSample,
    format_frame_stamps,
    format_gyro_log,
    gyro_flow,
    ns_to_seconds,
    seconds_to_ns,
)
from .mixtures import save_correspondences

FINE_STEPS_PER_FRAME = 2000


@dataclass(frozen=True)
class Trajectory:
    """Parametric camera motion.

    family:
        "constant": omega(t) = omega0.
        "sinusoid": omega(t) = omega0 + amp * sin(2 pi freq_hz t + phase).
        "random_walk": omega0 plus a seeded mean-reverting random process
            with time constant 1 / (2 pi rw_cutoff_hz) and stationary
            standard deviation rw_sigma per axis.

    Translation is a constant-velocity camera center path along trans_dir
    (seeded direction when None) covering trans_per_frame world units per
    frame period; None selects 0.02 * z_min, 0.0 disables translation.
    """

    family: str = "sinusoid"
    omega0: tuple = (0.0, 0.0, 0.0)
    amp: tuple = (0.2, 0.25, 0.1)
    freq_hz: float = 1.0
    phase: float = 0.0
    trans_per_frame: float | None = None
    trans_dir: tuple | None = None
    rw_sigma: float = 0.3
    rw_cutoff_hz: float = 4.0

    def __post_init__(self):
        if self.family not in ("constant", "sinusoid", "random_walk"):
            raise ValueError(f"unknown trajectory family {self.family!r}")


@dataclass(frozen=True)
class OisModel:
    """Lens-shift behavior.

    model:
        "none": no shift.
        "constant": s(t) = value (its inter-frame differential is zero).
        "ramp": s(t) = rate * t, clamped to max_shift; a linear ramp yields
            a constant inter-frame shift difference rate * t_f.
        "shake": first-order low-pass (cutoff cutoff_hz) of the image-center
            angular image velocity, scaled by -gain and the filter time
            constant, clamped to max_shift. Counteracts shake the way a
            stabilizer does while staying bounded during pans.
    """

    model: str = "none"
    value: tuple = (0.0, 0.0)
    rate: tuple = (0.0, 0.0)
    gain: float = 0.7
    cutoff_hz: float = 8.0
    max_shift: float = 15.0

    def __post_init__(self):
        if self.model not in ("none", "constant", "ramp", "shake"):
            raise ValueError(f"unknown OIS model {self.model!r}")
        if not 0.0 <= self.gain <= 1.0:
            raise ValueError("OIS gain must lie in [0, 1]")
        if self.cutoff_hz <= 0 or self.max_shift <= 0:
            raise ValueError("OIS cutoff and saturation must be positive")


@dataclass(frozen=True)
class Scene:
    """Smooth depth-surface scene sampled with n_points correspondences.

    detail scales the undulation wavenumbers; octaves adds finer undulation
    layers at one third the amplitude each, so narrow image bands still see
    genuine depth variation. Total relief always stays inside the depth range.
    """

    n_points: int = 200
    z_min: float = 5.0
    z_max: float = 10.0
    detail: float = 1.0
    octaves: int = 1

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError("scene needs at least one point")
        if not 0 < self.z_min < self.z_max:
            raise ValueError("depth range must satisfy 0 < z_min < z_max")
        if self.detail <= 0:
            raise ValueError("surface detail must be positive")
        if not 1 <= self.octaves <= 4:
            raise ValueError("octaves must lie in 1..4")


@dataclass
class SynthPair:
    """All simulator products for one consecutive frame pair."""

    a: int
    b: int
    gyro_flow: FlowField
    gt_flow: FlowField
    full_flow: FlowField
    corrs: np.ndarray
    ann_a: np.ndarray
    ann_b: np.ndarray
    gt_arrays: HomographyArray
    obs_arrays: HomographyArray


@dataclass
class SynthBundle:
    """In-memory simulation output; export_bundle writes it to disk."""

    camera: RsCameraModel
    seed: int
    frames: list[FrameStamp]
    gyro_times_ns: np.ndarray
    gyro_omegas: np.ndarray
    pairs: list[SynthPair]
    params: dict
    rotation_at: object = field(repr=False, default=None)
    lens_shift_at: object = field(repr=False, default=None)


class _OrientationTrack:
    """Fine-grid orientation integral of a rate function."""

    def __init__(self, omega_fn, t_end, dt):
        self.omega_fn = omega_fn
        self.dt = float(dt)
        n = int(np.ceil(t_end / dt)) + 1
        mids = (np.arange(n) + 0.5) * dt
        rvecs = omega_fn(mids) * dt
        increments = rodrigues_many(rvecs)
        nodes = np.empty((n + 1, 3, 3))
        nodes[0] = np.eye(3)
        acc = np.eye(3)
        for k in range(n):
            acc = increments[k] @ acc
            nodes[k + 1] = acc
        self.nodes = nodes

    def rotations_at(self, times) -> np.ndarray:
        """Batched world-to-camera rotations at arbitrary times."""
        t = np.atleast_1d(np.asarray(times, dtype=np.float64))
        if np.any(t < -1e-12) or np.any(t > (self.nodes.shape[0] - 1) * self.dt + 1e-9):
            raise ValueError("orientation query outside simulated range")
        k = np.clip((t / self.dt).astype(np.int64), 0, self.nodes.shape[0] - 2)
        rem = t - k * self.dt
        mids = self.omega_fn(k * self.dt + 0.5 * rem)
        residual = rodrigues_many(mids * rem[:, None])
        return np.einsum("nij,njk->nik", residual, self.nodes[k])

    def rotation_at(self, t) -> np.ndarray:
        return self.rotations_at([t])[0]


def _make_omega_fn(trajectory: Trajectory, t_end: float, rng) -> callable:
    omega0 = np.asarray(trajectory.omega0, dtype=np.float64)
    if trajectory.family == "constant":
        return lambda t: np.broadcast_to(
            omega0, np.shape(np.atleast_1d(t)) + (3,)
        ).copy()
    if trajectory.family == "sinusoid":
        amp = np.asarray(trajectory.amp, dtype=np.float64)
        w = 2.0 * np.pi * trajectory.freq_hz

        def omega_sin(t):
            t = np.atleast_1d(np.asarray(t, dtype=np.float64))
            return omega0 + amp * np.sin(w * t + trajectory.phase)[:, None]

        return omega_sin
    # Mean-reverting process on a 400 Hz grid, linearly interpolated.
    grid_dt = 1.0 / 400.0
    n = int(np.ceil(t_end / grid_dt)) + 2
    tau = 1.0 / (2.0 * np.pi * trajectory.rw_cutoff_hz)
    decay = np.exp(-grid_dt / tau)
    scale = trajectory.rw_sigma * np.sqrt(1.0 - decay * decay)
    noise = rng.standard_normal((n, 3))
    walk = np.empty((n, 3))
    walk[0] = trajectory.rw_sigma * noise[0]
    for k in range(1, n):
        walk[k] = walk[k - 1] * decay + scale * noise[k]
    grid_t = np.arange(n) * grid_dt

    def omega_rw(t):
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        out = np.empty(t.shape + (3,))
        for c in range(3):
            out[..., c] = np.interp(t, grid_t, walk[:, c])
        return omega0 + out

    return omega_rw


def _build_lens_shift(ois: OisModel, track, intr, fine_t, dt):
    """Lens shift sampled on the fine grid, returned as an interpolator."""
    n = fine_t.shape[0]
    if ois.model == "none":
        shift = np.zeros((n, 2))
    elif ois.model == "constant":
        shift = np.tile(np.asarray(ois.value, dtype=np.float64), (n, 1))
    elif ois.model == "ramp":
        shift = fine_t[:, None] * np.asarray(ois.rate, dtype=np.float64)
    else:
        # Image velocity of the center ray between consecutive fine nodes.
        k = intr.matrix
        center = np.array([intr.cx, intr.cy])
        d0 = intr.inverse @ np.array([intr.cx, intr.cy, 1.0])
        nodes = track.nodes[: n + 1]
        rel = np.einsum("nij,nkj,k->ni", nodes[1:], nodes[:-1], d0)
        q = rel @ k.T
        vel = (q[:, :2] / q[:, 2:3] - center) / dt
        tau = 1.0 / (2.0 * np.pi * ois.cutoff_hz)
        alpha = 1.0 - np.exp(-dt / tau)
        low = np.empty((n, 2))
        low[0] = vel[0]  # pre-charged filter: the stabilizer ran before t=0
        for i in range(1, n):
            low[i] = low[i - 1] + alpha * (vel[min(i, vel.shape[0] - 1)] - low[i - 1])
        shift = -ois.gain * tau * low
    norms = np.linalg.norm(shift, axis=1)
    over = norms > ois.max_shift
    if np.any(over):
        shift[over] *= (ois.max_shift / norms[over])[:, None]

    def lens_shift_at(t):
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        out = np.empty(t.shape + (2,))
        for c in range(2):
            out[..., c] = np.interp(t, fine_t, shift[:, c])
        return out

    return lens_shift_at


def _surface_params(scene: Scene, camera: RsCameraModel, rng) -> dict:
    z0 = 0.5 * (scene.z_min + scene.z_max)
    relief = 0.475 * (scene.z_max - scene.z_min)
    span_x = z0 * camera.width / camera.intrinsics.fx
    span_y = z0 * camera.height / camera.intrinsics.fy
    weights = 3.0 ** -np.arange(scene.octaves)
    weights /= weights.sum()
    a1 = np.empty(scene.octaves)
    a2 = np.empty(scene.octaves)
    k1 = np.empty(scene.octaves)
    k2 = np.empty(scene.octaves)
    p1 = np.empty(scene.octaves)
    p2 = np.empty(scene.octaves)
    for j in range(scene.octaves):
        split = rng.uniform(0.35, 0.65)
        layer = relief * weights[j]
        a1[j] = layer * split
        a2[j] = layer * (1.0 - split)
        k1[j] = 2.0 * np.pi * rng.uniform(0.5, 1.0) * scene.detail * 2.0**j / span_x
        k2[j] = 2.0 * np.pi * rng.uniform(0.5, 1.0) * scene.detail * 2.0**j / span_y
        p1[j] = rng.uniform(0.0, 2.0 * np.pi)
        p2[j] = rng.uniform(0.0, 2.0 * np.pi)
    # Keep every viewing ray transverse to the surface: the worst-case slope
    # times the widest ray tangent (plus rotation margin) must stay below 1,
    # or the Newton intersection loses its unique root.
    intr = camera.intrinsics
    tan_x = (max(intr.cx, camera.width - 1.0 - intr.cx) / intr.fx) + 0.1
    tan_y = (max(intr.cy, camera.height - 1.0 - intr.cy) / intr.fy) + 0.1
    steep = float(a1 @ k1) * tan_x + float(a2 @ k2) * tan_y
    if steep > 0.45:
        scale = 0.45 / steep
        a1 *= scale
        a2 *= scale
    return {"z0": z0, "a1": a1, "a2": a2, "k1": k1, "k2": k2, "p1": p1, "p2": p2}


def _surface_z(sp, x, y):
    z = np.full(np.broadcast(x, y).shape, sp["z0"], dtype=np.float64)
    for j in range(sp["a1"].shape[0]):
        z += sp["a1"][j] * np.sin(sp["k1"][j] * x + sp["p1"][j])
        z += sp["a2"][j] * np.cos(sp["k2"][j] * y + sp["p2"][j])
    return z


def _surface_grad(sp, x, y):
    gx = np.zeros(np.broadcast(x, y).shape, dtype=np.float64)
    gy = np.zeros_like(gx)
    for j in range(sp["a1"].shape[0]):
        gx += sp["a1"][j] * sp["k1"][j] * np.cos(sp["k1"][j] * x + sp["p1"][j])
        gy -= sp["a2"][j] * sp["k2"][j] * np.sin(sp["k2"][j] * y + sp["p2"][j])
    return gx, gy


def _intersect_surface(sp, origins, dirs):
    """Ray-surface intersection depths via vectorized Newton iteration.

    origins: (3,) or (n, 3); dirs: (n, 3). Returns (n,) parameter t with
    X = origin + t * dir on the surface.
    """
    o = np.broadcast_to(np.asarray(origins, dtype=np.float64), dirs.shape)
    t = (sp["z0"] - o[:, 2]) / dirs[:, 2]
    for _ in range(40):
        x = o[:, 0] + t * dirs[:, 0]
        y = o[:, 1] + t * dirs[:, 1]
        phi = o[:, 2] + t * dirs[:, 2] - _surface_z(sp, x, y)
        gx, gy = _surface_grad(sp, x, y)
        dphi = dirs[:, 2] - (gx * dirs[:, 0] + gy * dirs[:, 1])
        step = phi / dphi
        t = t - step
        if np.max(np.abs(step)) < 1e-13:
            break
    x = o[:, 0] + t * dirs[:, 0]
    y = o[:, 1] + t * dirs[:, 1]
    resid = np.abs(o[:, 2] + t * dirs[:, 2] - _surface_z(sp, x, y))
    if np.max(resid) > 1e-9:
        raise OisAlignError(
            f"surface intersection did not converge (residual {np.max(resid):.3g})"
        )
    return t


def simulate_sequence(
    camera: RsCameraModel,
    trajectory: Trajectory,
    ois: OisModel,
    scene: Scene,
    n_frames: int,
    seed: int,
    gyro_rate_hz: float = 200.0,
    gyro_noise_std: float = 5e-4,
    ann_points: int = 8,
) -> SynthBundle:
    """Simulate a rolling-shutter sequence with all oracle products.

    Args:
        camera: full camera model (intrinsics, timing, raster size).
        trajectory: parametric motion; seeded components draw from ``seed``.
        ois: lens-shift model.
        scene: depth-surface scene parameters.
        n_frames: number of frames; products cover consecutive pairs.
        seed: RNG seed; identical seeds and parameters reproduce the bundle
            byte for byte.
        gyro_rate_hz: gyro sampling rate; must be at least 2 / t_f.
        gyro_noise_std: white-noise standard deviation added to logged
            rates, rad/s.
        ann_points: annotation points stored per pair.

    Returns:
        SynthBundle with per-pair flows, correspondences, annotations, and
        homography arrays.
    """
    if n_frames < 2:
        raise ValueError("need at least two frames")
    timing = camera.timing
    if gyro_rate_hz < 2.0 / timing.t_f:
        raise ValueError(
            f"gyro rate {gyro_rate_hz} Hz below two samples per frame period"
        )
    intr = camera.intrinsics
    w, h = camera.width, camera.height
    rng = np.random.default_rng(seed)

    t_end = (n_frames - 1) * timing.t_f + timing.t_s + 4.0 / gyro_rate_hz
    dt_fine = timing.t_f / FINE_STEPS_PER_FRAME

    # Seeded draws happen in a fixed order: surface, scene rays, translation
    # direction, trajectory process, gyro noise.
    sp = _surface_params(scene, camera, rng)
    margin_x, margin_y = 0.06 * w, 0.06 * h
    px = rng.uniform(margin_x, w - 1 - margin_x, scene.n_points)
    py = rng.uniform(margin_y, h - 1 - margin_y, scene.n_points)
    if trajectory.trans_dir is None:
        raw = rng.standard_normal(3)
        trans_dir = raw / np.linalg.norm(raw)
    else:
        trans_dir = np.asarray(trajectory.trans_dir, dtype=np.float64)
        trans_dir = trans_dir / np.linalg.norm(trans_dir)
    trans_per_frame = (
        0.02 * scene.z_min
        if trajectory.trans_per_frame is None
        else float(trajectory.trans_per_frame)
    )
    trans_vel = trans_dir * (trans_per_frame / timing.t_f)
    trans_zero = trans_per_frame == 0.0

    omega_fn = _make_omega_fn(trajectory, t_end, rng)
    track = _OrientationTrack(omega_fn, t_end, dt_fine)
    fine_t = np.arange(track.nodes.shape[0] - 1) * dt_fine
    lens_shift_at = _build_lens_shift(ois, track, intr, fine_t, dt_fine)

    def center_at(times):
        t = np.atleast_1d(np.asarray(times, dtype=np.float64))
        return t[:, None] * trans_vel

    # Gyro log at quantized nanosecond times; estimators only ever see this.
    n_samples = int(np.floor(t_end * gyro_rate_hz)) + 1
    times_ns = np.array(
        [seconds_to_ns(k / gyro_rate_hz) for k in range(n_samples)], dtype=np.int64
    )
    sample_t = np.array([ns_to_seconds(int(t)) for t in times_ns])
    omegas = omega_fn(sample_t)
    if gyro_noise_std > 0:
        omegas = omegas + rng.normal(0.0, gyro_noise_std, omegas.shape)
    samples = [GyroSample(t, om) for t, om in zip(sample_t, omegas)]

    frames = [
        FrameStamp(i, ns_to_seconds(seconds_to_ns(i * timing.t_f)))
        for i in range(n_frames)
    ]

    # Scene points on the surface, cast from the frame-0 camera.
    pix0 = np.stack([px, py, np.ones_like(px)], axis=1)
    r0 = track.rotation_at(frames[0].t_start)
    dirs0 = (r0.T @ (intr.inverse @ pix0.T)).T
    depths = _intersect_surface(sp, np.zeros(3), dirs0)
    points = dirs0 * depths[:, None]

    xs = np.arange(w, dtype=np.float64)
    pix_row = np.stack([xs, np.zeros_like(xs), np.ones_like(xs)])
    k_mat = intr.matrix
    k_inv = intr.inverse
    n_patch = timing.n_patches

    def rotation_flows(t_a_start, t_b_start):
        """Rotation-only and full-motion flow rasters for one pair."""
        rows = np.arange(h, dtype=np.float64)
        tau_a = t_a_start + timing.t_s * rows / h
        tau_b = tau_a + (t_b_start - t_a_start)
        ra = track.rotations_at(tau_a)
        rb = track.rotations_at(tau_b)
        ca = center_at(tau_a)
        cb = center_at(tau_b)
        ds = lens_shift_at(tau_b) - lens_shift_at(tau_a)
        gt_uv = np.empty((h, w, 2))
        full_uv = np.empty((h, w, 2))
        for y in range(h):
            pix = pix_row.copy()
            pix[1] = y
            d_cam = k_inv @ pix
            d_world = ra[y].T @ d_cam
            q = k_mat @ (rb[y] @ d_world)
            gt_uv[y, :, 0] = q[0] / q[2] - pix[0]
            gt_uv[y, :, 1] = q[1] / q[2] - pix[1]
            if trans_zero:
                full_uv[y] = gt_uv[y]
            else:
                t_depth = _intersect_surface(sp, ca[y], d_world.T)
                pts = ca[y] + t_depth[:, None] * d_world.T
                cam_b = (rb[y] @ (pts - cb[y]).T)
                qf = k_mat @ cam_b
                full_uv[y, :, 0] = qf[0] / qf[2] - pix[0]
                full_uv[y, :, 1] = qf[1] / qf[2] - pix[1]
            full_uv[y, :, 0] += ds[y, 0]
            full_uv[y, :, 1] += ds[y, 1]
        return gt_uv, full_uv

    def project_points(times):
        """Base projections (no lens shift) of all scene points at times."""
        r = track.rotations_at(times)
        c = center_at(times)
        cam = np.einsum("nij,nj->ni", r, points - c)
        q = cam @ k_mat.T
        return q[:, :2] / q[:, 2:3], cam[:, 2]

    def pair_correspondences(t_a_start, t_b_start):
        rows = np.full(points.shape[0], 0.5 * h)
        tau = t_a_start + timing.t_s * np.clip(rows, 0.0, h - 1.0) / h
        for _ in range(25):
            proj, _ = project_points(tau)
            new_tau = t_a_start + timing.t_s * np.clip(proj[:, 1], 0.0, h - 1.0) / h
            if np.max(np.abs(new_tau - tau)) < 1e-14:
                tau = new_tau
                break
            tau = new_tau
        p1, depth_a = project_points(tau)
        tau_b = tau + (t_b_start - t_a_start)
        p2_base, depth_b = project_points(tau_b)
        p2 = p2_base + (lens_shift_at(tau_b) - lens_shift_at(tau))
        keep = (
            (depth_a > 1e-3)
            & (depth_b > 1e-3)
            & (p1[:, 0] >= 0.0)
            & (p1[:, 0] <= w - 1.0)
            & (p1[:, 1] >= 0.0)
            & (p1[:, 1] <= h - 1.0)
            & (p2[:, 0] >= 0.0)
            & (p2[:, 0] <= w - 1.0)
            & (p2[:, 1] >= 0.0)
            & (p2[:, 1] <= h - 1.0)
        )
        return np.hstack([p1[keep], p2[keep]])

    def patch_arrays(t_a_start, t_b_start):
        gt = np.empty((n_patch, 3, 3))
        obs = np.empty((n_patch, 3, 3))
        for i in range(n_patch):
            ta_i = t_a_start + timing.t_s * i / n_patch
            tb_i = t_b_start + timing.t_s * i / n_patch
            r_ab = track.rotation_at(tb_i) @ track.rotation_at(ta_i).T
            gt[i] = normalize_homography(k_mat @ r_ab @ k_inv)
            ds = (lens_shift_at(tb_i) - lens_shift_at(ta_i))[0]
            t_shift = np.array(
                [[1.0, 0.0, ds[0]], [0.0, 1.0, ds[1]], [0.0, 0.0, 1.0]]
            )
            obs[i] = normalize_homography(t_shift @ gt[i])
        return HomographyArray(gt, h), HomographyArray(obs, h)

    pairs = []
    for a in range(n_frames - 1):
        b = a + 1
        f_a, f_b = frames[a], frames[b]
        gt_uv, full_uv = rotation_flows(f_a.t_start, f_b.t_start)
        corrs = pair_correspondences(f_a.t_start, f_b.t_start)
        order = np.lexsort((corrs[:, 0], corrs[:, 1]))
        corrs = corrs[order]
        n_ann = min(ann_points, corrs.shape[0])
        if n_ann < 1:
            raise OisAlignError(
                f"pair {a}-{b}: no visible correspondences for annotations"
            )
        idx = np.unique(np.round(np.linspace(0, corrs.shape[0] - 1, n_ann)).astype(int))
        gt_arr, obs_arr = patch_arrays(f_a.t_start, f_b.t_start)
        pairs.append(
            SynthPair(
                a=a,
                b=b,
                gyro_flow=gyro_flow(samples, f_a, f_b, timing, intr, w, h),
                gt_flow=FlowField(gt_uv),
                full_flow=FlowField(full_uv),
                corrs=corrs,
                ann_a=corrs[idx, 0:2].copy(),
                ann_b=corrs[idx, 2:4].copy(),
                gt_arrays=gt_arr,
                obs_arrays=obs_arr,
            )
        )

    params = {
        "n_frames": n_frames,
        "gyro_rate_hz": gyro_rate_hz,
        "gyro_noise_std": gyro_noise_std,
        "ann_points": ann_points,
        "trajectory": {
            "family": trajectory.family,
            "omega0": list(trajectory.omega0),
            "amp": list(trajectory.amp),
            "freq_hz": trajectory.freq_hz,
            "phase": trajectory.phase,
            "trans_per_frame": trans_per_frame,
            "trans_dir": [float(v) for v in trans_dir],
            "rw_sigma": trajectory.rw_sigma,
            "rw_cutoff_hz": trajectory.rw_cutoff_hz,
        },
        "ois": {
            "model": ois.model,
            "value": list(ois.value),
            "rate": list(ois.rate),
            "gain": ois.gain,
            "cutoff_hz": ois.cutoff_hz,
            "max_shift": ois.max_shift,
        },
        "scene": {
            "n_points": scene.n_points,
            "z_min": scene.z_min,
            "z_max": scene.z_max,
            "detail": scene.detail,
            "octaves": scene.octaves,
        },
    }
    return SynthBundle(
        camera=camera,
        seed=seed,
        frames=frames,
        gyro_times_ns=times_ns,
        gyro_omegas=omegas,
        pairs=pairs,
        params=params,
        rotation_at=track.rotation_at,
        lens_shift_at=lens_shift_at,
    )


def pair_name(a: int, b: int) -> str:
    return f"{a:06d}_{b:06d}"


def export_bundle(bundle: SynthBundle, out_dir) -> Path:
    """Write a bundle to disk and return the manifest path.

    Layout: camera.cfg, gyro.csv, frames.csv, pairs/<a>_<b>.{gyro,gt,full}.flo
    plus .corrs.csv, .ann.json, .gt_arrays.txt, .obs_arrays.txt, and a
    manifest.json tying everything together with relative paths.
    """
    out = Path(out_dir)
    (out / "pairs").mkdir(parents=True, exist_ok=True)
    save_camera_config(out / "camera.cfg", bundle.camera)
    with open(out / "gyro.csv", "w", encoding="ascii") as fh:
        fh.write(format_gyro_log(bundle.gyro_times_ns, bundle.gyro_omegas))
    with open(out / "frames.csv", "w", encoding="ascii") as fh:
        fh.write(format_frame_stamps(bundle.frames))

    manifest_pairs = []
    for pair in bundle.pairs:
        name = pair_name(pair.a, pair.b)
        rel = f"pairs/{name}"
        write_flo(out / f"{rel}.gyro.flo", pair.gyro_flow)
        write_flo(out / f"{rel}.gt.flo", pair.gt_flow)
        write_flo(out / f"{rel}.full.flo", pair.full_flow)
        save_correspondences(out / f"{rel}.corrs.csv", pair.corrs)
        save_annotation(
            out / f"{rel}.ann.json",
            AnnotationPair(category="SYNTH", points_a=pair.ann_a, points_b=pair.ann_b),
        )
        save_homography_array(out / f"{rel}.gt_arrays.txt", pair.gt_arrays)
        save_homography_array(out / f"{rel}.obs_arrays.txt", pair.obs_arrays)
        manifest_pairs.append(
            {
                "a": pair.a,
                "b": pair.b,
                "gyro_flow": f"{rel}.gyro.flo",
                "gt_flow": f"{rel}.gt.flo",
                "full_flow": f"{rel}.full.flo",
                "corrs": f"{rel}.corrs.csv",
                "annotations": f"{rel}.ann.json",
                "gt_arrays": f"{rel}.gt_arrays.txt",
                "obs_arrays": f"{rel}.obs_arrays.txt",
            }
        )
    manifest = {
        "camera": bundle.camera.to_dict(),
        "seed": bundle.seed,
        "gyro_log": "gyro.csv",
        "frames": "frames.csv",
        "camera_config": "camera.cfg",
        "pairs": manifest_pairs,
        "params": bundle.params,
    }
    manifest_path = out / "manifest.json"
    with open(manifest_path, "w", encoding="ascii") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path


