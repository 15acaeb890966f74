"""Gyro-guided rolling-shutter image alignment with OIS compensation.

Modules:
    geometry: rotations, intrinsics, homography arrays, dense flow synthesis.
    gyro: gyroscope log parsing and rotation integration.
    mixtures: joint per-patch fundamental-matrix estimation and the
        rotation-only ground-truth flow derived from it.
    synth: rolling-shutter sequence simulator (oracle for tests and
        training-data generation).
    compensator: parametric per-patch correction fitted between gyro and
        ground-truth homography arrays.
    evaluate: annotation-based geometry-distance evaluation and reports.
    flowio: .flo serialization; kernels: dense flow backends; cli: the
        command-line interface.
"""

from .errors import OisAlignError
from .flowio import FlowField, read_flo, write_flo
from .geometry import (
    CameraIntrinsics,
    HomographyArray,
    compose_rotations,
    homography_array_to_flow,
    rodrigues,
    rotation_to_homography,
)
from .gyro import (
    FrameStamp,
    GyroSample,
    RsTiming,
    gyro_flow,
    gyro_homography_array,
    integrate_rotation,
    parse_gyro_log,
)
from .config import RsCameraModel, load_camera_config, save_camera_config
from .mixtures import (
    FundamentalMixture,
    estimate_mixture,
    mixture_rotation_flow,
    mixture_to_homography_array,
)
from .compensator import (
    PatchCorrection,
    apply_correction,
    corrected_flow,
    fit_correction,
)
from .evaluate import AnnotationPair, evaluate_flows, geometry_distance
from .synth import OisModel, Scene, Trajectory, export_bundle, simulate_sequence

__version__ = "0.1.0"

__all__ = [
    "AnnotationPair",
    "CameraIntrinsics",
    "FlowField",
    "FrameStamp",
    "FundamentalMixture",
    "GyroSample",
    "HomographyArray",
    "OisAlignError",
    "OisModel",
    "PatchCorrection",
    "RsCameraModel",
    "RsTiming",
    "Scene",
    "Trajectory",
    "apply_correction",
    "compose_rotations",
    "corrected_flow",
    "estimate_mixture",
    "evaluate_flows",
    "export_bundle",
    "fit_correction",
    "geometry_distance",
    "gyro_flow",
    "gyro_homography_array",
    "homography_array_to_flow",
    "integrate_rotation",
    "load_camera_config",
    "mixture_rotation_flow",
    "mixture_to_homography_array",
    "parse_gyro_log",
    "read_flo",
    "rodrigues",
    "rotation_to_homography",
    "save_camera_config",
    "simulate_sequence",
    "write_flo",
    "__version__",
]
