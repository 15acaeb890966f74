"""Camera configuration: intrinsics plus rolling-shutter timing.

File format is one ``key = value`` pair per line; ``#`` starts a comment.
Required keys: fx, fy, cx, cy, skew, t_s, t_f, n_patches, width, height.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .geometry import CameraIntrinsics
from .gyro import RsTiming

_FLOAT_KEYS = ("fx", "fy", "cx", "cy", "skew", "t_s", "t_f")
_INT_KEYS = ("n_patches", "width", "height")


@dataclass(frozen=True)
class RsCameraModel:
    """Full rolling-shutter camera description."""

    intrinsics: CameraIntrinsics
    timing: RsTiming
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigError("image dimensions must be positive")

    def to_dict(self) -> dict:
        return {
            "fx": self.intrinsics.fx,
            "fy": self.intrinsics.fy,
            "cx": self.intrinsics.cx,
            "cy": self.intrinsics.cy,
            "skew": self.intrinsics.skew,
            "t_s": self.timing.t_s,
            "t_f": self.timing.t_f,
            "n_patches": self.timing.n_patches,
            "width": self.width,
            "height": self.height,
        }


def camera_from_dict(values: dict) -> RsCameraModel:
    missing = [k for k in (*_FLOAT_KEYS, *_INT_KEYS) if k not in values]
    if missing:
        raise ConfigError(f"missing camera keys: {', '.join(sorted(missing))}")
    try:
        intr = CameraIntrinsics(
            fx=float(values["fx"]),
            fy=float(values["fy"]),
            cx=float(values["cx"]),
            cy=float(values["cy"]),
            skew=float(values["skew"]),
        )
        timing = RsTiming(
            t_s=float(values["t_s"]),
            t_f=float(values["t_f"]),
            n_patches=int(values["n_patches"]),
        )
        return RsCameraModel(
            intrinsics=intr,
            timing=timing,
            width=int(values["width"]),
            height=int(values["height"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_camera_config(path) -> RsCameraModel:
    """Parse a key=value camera config file."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno}: expected key = value")
            key, _, val = line.partition("=")
            key = key.strip()
            val = val.strip()
            if key not in _FLOAT_KEYS and key not in _INT_KEYS:
                raise ConfigError(f"{path}: line {lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"{path}: line {lineno}: duplicate key {key!r}")
            values[key] = val
    try:
        typed: dict = {k: float(values[k]) for k in _FLOAT_KEYS if k in values}
        typed.update({k: int(values[k]) for k in _INT_KEYS if k in values})
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return camera_from_dict(typed)


def save_camera_config(path, camera: RsCameraModel) -> None:
    """Write a camera model as a key=value file (round-trip exact)."""
    data = camera.to_dict()
    lines = []
    for key in (*_FLOAT_KEYS, *_INT_KEYS):
        value = data[key]
        lines.append(f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
