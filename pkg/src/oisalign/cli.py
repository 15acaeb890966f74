"""Command-line interface.

Subcommands cover the full pipeline: synthesize a sequence, predict flows
from gyro logs, estimate flows from correspondences, fit and apply the
static correction, score flows against annotations, and export a training
set for learned correction.

Conventions shared by all subcommands:

* Files belonging to one frame pair share a key, the file name up to the
  first dot (``000000_000001.gyro.flo`` has key ``000000_000001``).
  Subcommands that consume two directories match files by key.
* Arguments named like ``--flows`` accept a directory (a default pattern is
  applied inside) or a glob pattern selecting exactly the wanted files.
* Camera parameters come from ``--camera`` (a key=value file); individual
  ``--fx``-style flags override single values and can also stand alone.
* ``--sigma`` accepts pixels (``27``) or a frame-height fraction (``0.1h``).
* Errors from package code exit with status 1 and one line on stderr;
  ``--json-errors`` switches that line to a JSON object.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .compensator import (
    apply_correction,
    corrected_flow,
    fit_correction,
    load_correction,
    save_correction,
)
from .config import ConfigError, RsCameraModel, camera_from_dict, load_camera_config
from .errors import OisAlignError
from .evaluate import evaluate_flows, load_annotation
from .flowio import read_flo, write_flo
from .geometry import (
    homography_array_to_flow,
    load_homography_array,
    save_homography_array,
)
from .gyro import gyro_homography_array, parse_frame_stamps, parse_gyro_log
from .mixtures import (
    estimate_mixture,
    load_correspondences,
    mixture_to_homography_array,
    save_mixture,
)

log = logging.getLogger("oisalign.cli")

DEFAULT_CAMERA = {
    "fx": 300.0,
    "fy": 300.0,
    "cx": 179.5,
    "cy": 134.5,
    "skew": 0.0,
    "t_s": 0.025,
    "t_f": 1.0 / 30.0,
    "n_patches": 6,
    "width": 360,
    "height": 270,
}

CAMERA_KEYS = tuple(DEFAULT_CAMERA)


def parse_sigma(text: str, frame_height: int) -> float:
    """Pixels, or a frame-height fraction when suffixed with ``h``."""
    text = text.strip()
    try:
        if text.endswith("h"):
            return float(text[:-1]) * frame_height
        return float(text)
    except ValueError:
        raise ConfigError(
            f"bad sigma {text!r}: expected a number or a number followed by 'h'"
        ) from None


def _float3(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected 3 comma-separated values: {text!r}")
    return tuple(float(p) for p in parts)


def _float2(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 2 comma-separated values: {text!r}")
    return tuple(float(p) for p in parts)


def _axis_map(text: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 9:
        raise argparse.ArgumentTypeError("axis map needs 9 comma-separated values")
    return np.asarray([float(p) for p in parts], dtype=np.float64).reshape(3, 3)


def add_camera_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--camera", help="camera config file (key=value lines)")
    group = parser.add_argument_group("camera overrides")
    for key in ("fx", "fy", "cx", "cy", "skew", "t_s", "t_f"):
        group.add_argument(f"--{key.replace('_', '-')}", type=float, default=None)
    for key in ("n_patches", "width", "height"):
        group.add_argument(f"--{key.replace('_', '-')}", type=int, default=None)


def build_camera(args) -> RsCameraModel:
    if args.camera:
        values = load_camera_config(args.camera).to_dict()
    else:
        values = dict(DEFAULT_CAMERA)
    for key in CAMERA_KEYS:
        override = getattr(args, key)
        if override is not None:
            values[key] = override
    return camera_from_dict(values)


def _key_of(path) -> str:
    return Path(path).name.split(".")[0]


def _expand(source, default_pattern: str) -> dict:
    """Map key -> path for a directory (with default pattern) or a glob."""
    if os.path.isdir(source):
        paths = sorted(glob.glob(os.path.join(source, default_pattern)))
    else:
        paths = sorted(glob.glob(source))
    out = {}
    for p in paths:
        key = _key_of(p)
        if key in out:
            raise ConfigError(
                f"duplicate key {key!r}: {out[key]} and {p};"
                " use a more specific pattern"
            )
        out[key] = p
    if not out:
        raise ConfigError(f"no files matched {source!r}")
    return out


def _matched(a: dict, b: dict, what_a: str, what_b: str) -> list:
    keys = sorted(a.keys() & b.keys())
    if not keys:
        raise ConfigError(f"no common keys between {what_a} and {what_b}")
    missing = sorted(a.keys() ^ b.keys())
    if missing:
        log.warning("%d unmatched key(s) skipped: %s", len(missing), ", ".join(missing[:5]))
    return keys


def _run_jobs(jobs: int, work, items) -> list:
    if jobs <= 1:
        return [work(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(work, items))


def _parse_pair_list(text: str) -> list:
    pairs = []
    for chunk in text.split(","):
        a, sep, b = chunk.partition(":")
        if not sep:
            raise ConfigError(f"bad pair {chunk!r}: expected a:b")
        pairs.append((int(a), int(b)))
    return pairs


def cmd_synth(args) -> int:
    from .synth import OisModel, Scene, Trajectory, export_bundle, simulate_sequence

    camera = build_camera(args)
    trajectory = Trajectory(
        family=args.trajectory,
        omega0=args.omega0,
        amp=args.amp,
        freq_hz=args.freq_hz,
        phase=args.phase,
        trans_per_frame=args.trans_per_frame,
        trans_dir=args.trans_dir,
        rw_sigma=args.rw_sigma,
        rw_cutoff_hz=args.rw_cutoff_hz,
    )
    ois = OisModel(
        model=args.ois,
        value=args.ois_value,
        rate=args.ois_rate,
        gain=args.ois_gain,
        cutoff_hz=args.ois_cutoff_hz,
        max_shift=args.ois_max_shift,
    )
    scene = Scene(n_points=args.n_points, z_min=args.z_min, z_max=args.z_max)
    log.info(
        "synthesizing %d frames, seed %d, trajectory %s, ois %s",
        args.n_frames,
        args.seed,
        trajectory.family,
        ois.model,
    )
    bundle = simulate_sequence(
        camera,
        trajectory,
        ois,
        scene,
        n_frames=args.n_frames,
        seed=args.seed,
        gyro_rate_hz=args.gyro_rate_hz,
        gyro_noise_std=args.gyro_noise_std,
        ann_points=args.ann_points,
    )
    manifest = export_bundle(bundle, args.out)
    log.info("wrote %s", manifest)
    print(manifest)
    return 0


def cmd_gyroflow(args) -> int:
    camera = build_camera(args)
    timing = camera.timing
    samples = parse_gyro_log(args.gyro)
    stamps = {f.index: f for f in parse_frame_stamps(args.frames)}
    if args.pairs:
        pairs = _parse_pair_list(args.pairs)
    else:
        indices = sorted(stamps)
        pairs = list(zip(indices[:-1], indices[1:]))
    for a, b in pairs:
        if a not in stamps or b not in stamps:
            raise ConfigError(f"pair {a}:{b} not covered by {args.frames}")
    if not args.flow_out and not args.arrays_out:
        raise ConfigError("nothing to do: pass --flow-out and/or --arrays-out")
    for out in (args.flow_out, args.arrays_out):
        if out:
            Path(out).mkdir(parents=True, exist_ok=True)
    log.info(
        "gyro flow for %d pair(s), n_patches=%d, interpolate=%s",
        len(pairs),
        timing.n_patches,
        args.interpolate,
    )

    def work(pair):
        a, b = pair
        name = f"{a:06d}_{b:06d}"
        arr = gyro_homography_array(
            samples,
            stamps[a],
            stamps[b],
            timing,
            camera.intrinsics,
            camera.height,
            axis_map=args.axis_map,
        )
        if args.arrays_out:
            save_homography_array(Path(args.arrays_out) / f"{name}.gyro_arrays.txt", arr)
        if args.flow_out:
            flow = homography_array_to_flow(
                arr, camera.width, camera.height, interpolate=args.interpolate
            )
            write_flo(Path(args.flow_out) / f"{name}.gyro.flo", flow)
        return name

    for name in _run_jobs(args.jobs, work, pairs):
        log.debug("done %s", name)
    return 0


def cmd_gtflow(args) -> int:
    camera = build_camera(args)
    n_patches = args.n_patches if args.n_patches is not None else camera.timing.n_patches
    sigma = parse_sigma(args.sigma, camera.height)
    corrs_by_key = _expand(args.corrs, "*.corrs.csv")
    for out in (args.flow_out, args.arrays_out, args.mixture_out):
        if out:
            Path(out).mkdir(parents=True, exist_ok=True)
    if not (args.flow_out or args.arrays_out or args.mixture_out):
        raise ConfigError(
            "nothing to do: pass --flow-out, --arrays-out, and/or --mixture-out"
        )
    log.info(
        "estimating mixtures for %d pair(s): n_patches=%d sigma=%s lam=%s",
        len(corrs_by_key),
        n_patches,
        repr(sigma),
        repr(args.lam),
    )

    def work(key):
        corrs = load_correspondences(corrs_by_key[key])
        mixture = estimate_mixture(
            corrs, n_patches, camera.height, sigma=sigma, lam=args.lam
        )
        if args.mixture_out:
            save_mixture(Path(args.mixture_out) / f"{key}.mixture.txt", mixture)
        if args.flow_out or args.arrays_out:
            arr = mixture_to_homography_array(mixture, corrs, camera.intrinsics)
            if args.arrays_out:
                save_homography_array(
                    Path(args.arrays_out) / f"{key}.mix_arrays.txt", arr
                )
            if args.flow_out:
                flow = homography_array_to_flow(
                    arr, camera.width, camera.height, interpolate=args.interpolate
                )
                write_flo(Path(args.flow_out) / f"{key}.mix.flo", flow)
        return key

    for key in _run_jobs(args.jobs, work, sorted(corrs_by_key)):
        log.debug("done %s", key)
    return 0


def cmd_fit(args) -> int:
    camera = build_camera(args)
    predicted = _expand(args.predicted, "*.txt")
    target = _expand(args.target, "*.txt")
    keys = _matched(predicted, target, "--predicted", "--target")
    pairs = [
        (load_homography_array(predicted[k]), load_homography_array(target[k]))
        for k in keys
    ]
    log.info("fitting correction from %d pair(s)", len(pairs))
    correction = fit_correction(pairs, camera.width, camera.height)
    save_correction(args.out, correction)
    log.info("wrote %s (bias %.4f, %.4f px)", args.out, *correction.bias)
    print(args.out)
    return 0


def cmd_compensate(args) -> int:
    camera = build_camera(args)
    correction = load_correction(args.correction)
    arrays = _expand(args.arrays, "*.txt")
    for out in (args.flow_out, args.arrays_out):
        if out:
            Path(out).mkdir(parents=True, exist_ok=True)
    if not (args.flow_out or args.arrays_out):
        raise ConfigError("nothing to do: pass --flow-out and/or --arrays-out")
    log.info("compensating %d array(s)", len(arrays))

    def work(key):
        arr = load_homography_array(arrays[key])
        if args.arrays_out:
            save_homography_array(
                Path(args.arrays_out) / f"{key}.comp_arrays.txt",
                apply_correction(correction, arr),
            )
        if args.flow_out:
            flow = corrected_flow(
                correction, arr, camera.width, camera.height,
                interpolate=args.interpolate,
            )
            write_flo(Path(args.flow_out) / f"{key}.comp.flo", flow)
        return key

    for key in _run_jobs(args.jobs, work, sorted(arrays)):
        log.debug("done %s", key)
    return 0


def cmd_eval(args) -> int:
    flows = _expand(args.flows, "*.flo")
    annotations = _expand(args.annotations, "*.ann.json")
    keys = _matched(flows, annotations, "--flows", "--annotations")
    items = [
        (key, read_flo(flows[key]), load_annotation(annotations[key])) for key in keys
    ]
    report = evaluate_flows(items)
    rendered = {
        "text": report.to_text,
        "json": report.to_json,
        "csv": report.to_csv,
    }[args.format]()
    if args.out:
        Path(args.out).write_text(rendered, encoding="ascii")
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(rendered)
    log.info("overall clamped distance: %.6f px over %d pair(s)", report.overall, len(keys))
    return 0


def cmd_export_training(args) -> int:
    with open(args.manifest, "r", encoding="ascii") as fh:
        manifest = json.load(fh)
    camera = camera_from_dict(manifest["camera"])
    root = Path(args.manifest).parent
    out = Path(args.out)
    (out / "pairs").mkdir(parents=True, exist_ok=True)
    sigma = parse_sigma(args.sigma, camera.height)
    n_patches = args.n_patches if args.n_patches is not None else camera.timing.n_patches
    log.info(
        "exporting %d pair(s) for training: n_patches=%d sigma=%s",
        len(manifest["pairs"]),
        n_patches,
        repr(sigma),
    )

    def work(entry):
        key = f"{entry['a']:06d}_{entry['b']:06d}"
        rel = f"pairs/{key}"
        corrs = load_correspondences(root / entry["corrs"])
        mixture = estimate_mixture(
            corrs, n_patches, camera.height, sigma=sigma, lam=args.lam
        )
        arr = mixture_to_homography_array(mixture, corrs, camera.intrinsics)
        flow = homography_array_to_flow(arr, camera.width, camera.height)
        write_flo(out / f"{rel}.target.flo", flow)
        for src_key, suffix in (
            ("gyro_flow", "gyro.flo"),
            ("full_flow", "full.flo"),
            ("corrs", "corrs.csv"),
            ("annotations", "ann.json"),
        ):
            shutil.copyfile(root / entry[src_key], out / f"{rel}.{suffix}")
        return {
            "a": entry["a"],
            "b": entry["b"],
            "gyro_flow": f"{rel}.gyro.flo",
            "target_flow": f"{rel}.target.flo",
            "full_flow": f"{rel}.full.flo",
            "corrs": f"{rel}.corrs.csv",
            "annotations": f"{rel}.ann.json",
        }

    entries = _run_jobs(args.jobs, work, manifest["pairs"])
    entries.sort(key=lambda e: (e["a"], e["b"]))
    training = {
        "camera": camera.to_dict(),
        "source_manifest": str(args.manifest),
        "pairs": entries,
        "params": {"sigma": sigma, "lam": args.lam, "n_patches": n_patches},
    }
    path = out / "manifest.json"
    with open(path, "w", encoding="ascii") as fh:
        json.dump(training, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("wrote %s", path)
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oisalign",
        description="Gyro-guided rolling-shutter frame alignment tools.",
    )
    parser.add_argument("--version", action="version", version=f"oisalign {__version__}")
    parser.add_argument(
        "--log-level",
        default="info",
        choices=("debug", "info", "warning", "error"),
    )
    parser.add_argument(
        "--json-errors",
        action="store_true",
        help="emit errors as one JSON object on stderr",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="simulate a sequence with oracle products")
    add_camera_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-frames", type=int, default=8)
    p.add_argument(
        "--trajectory",
        default="sinusoid",
        choices=("constant", "sinusoid", "random_walk"),
    )
    p.add_argument("--omega0", type=_float3, default=(0.0, 0.0, 0.0))
    p.add_argument("--amp", type=_float3, default=(0.2, 0.25, 0.1))
    p.add_argument("--freq-hz", type=float, default=1.0)
    p.add_argument("--phase", type=float, default=0.0)
    p.add_argument("--trans-per-frame", type=float, default=None)
    p.add_argument("--trans-dir", type=_float3, default=None)
    p.add_argument("--rw-sigma", type=float, default=0.3)
    p.add_argument("--rw-cutoff-hz", type=float, default=4.0)
    p.add_argument(
        "--ois", default="none", choices=("none", "constant", "ramp", "shake")
    )
    p.add_argument("--ois-value", type=_float2, default=(0.0, 0.0))
    p.add_argument("--ois-rate", type=_float2, default=(0.0, 0.0))
    p.add_argument("--ois-gain", type=float, default=0.7)
    p.add_argument("--ois-cutoff-hz", type=float, default=8.0)
    p.add_argument("--ois-max-shift", type=float, default=15.0)
    p.add_argument("--n-points", type=int, default=200)
    p.add_argument("--z-min", type=float, default=5.0)
    p.add_argument("--z-max", type=float, default=10.0)
    p.add_argument("--gyro-rate-hz", type=float, default=200.0)
    p.add_argument("--gyro-noise-std", type=float, default=5e-4)
    p.add_argument("--ann-points", type=int, default=8)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gyroflow", help="predict flows from a gyro log")
    add_camera_flags(p)
    p.add_argument("--gyro", required=True, help="gyro log CSV")
    p.add_argument("--frames", required=True, help="frame stamp CSV")
    p.add_argument("--pairs", help="a:b[,a:b...]; default: consecutive frames")
    p.add_argument("--flow-out", help="directory for <key>.gyro.flo")
    p.add_argument("--arrays-out", help="directory for <key>.gyro_arrays.txt")
    p.add_argument("--axis-map", type=_axis_map, default=None)
    p.add_argument("--interpolate", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_gyroflow)

    p = sub.add_parser("gtflow", help="estimate flows from correspondences")
    add_camera_flags(p)
    p.add_argument("--corrs", required=True, help="correspondence dir or glob")
    p.add_argument("--flow-out", help="directory for <key>.mix.flo")
    p.add_argument("--arrays-out", help="directory for <key>.mix_arrays.txt")
    p.add_argument("--mixture-out", help="directory for <key>.mixture.txt")
    p.add_argument("--sigma", default="0.001h")
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--interpolate", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_gtflow)

    p = sub.add_parser("fit", help="fit a static correction from array pairs")
    add_camera_flags(p)
    p.add_argument("--predicted", required=True, help="arrays to correct (dir or glob)")
    p.add_argument("--target", required=True, help="arrays to match (dir or glob)")
    p.add_argument("--out", required=True, help="correction JSON path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compensate", help="apply a correction to arrays")
    add_camera_flags(p)
    p.add_argument("--correction", required=True)
    p.add_argument("--arrays", required=True, help="arrays dir or glob")
    p.add_argument("--flow-out", help="directory for <key>.comp.flo")
    p.add_argument("--arrays-out", help="directory for <key>.comp_arrays.txt")
    p.add_argument("--interpolate", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_compensate)

    p = sub.add_parser("eval", help="score flows against annotations")
    p.add_argument("--flows", required=True, help="flow dir or glob")
    p.add_argument("--annotations", required=True, help="annotation dir or glob")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--format", default="text", choices=("text", "json", "csv"))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser(
        "export-training", help="build a training set from a synth manifest"
    )
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sigma", default="0.001h")
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--n-patches", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_export_training)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (OisAlignError, OSError, ValueError) as exc:
        module = getattr(exc, "module", "cli")
        if args.json_errors:
            payload = {"error": {"module": module, "message": str(exc)}}
            print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        else:
            print(f"oisalign error [{module}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
