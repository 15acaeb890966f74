"""Pytest hooks and session fixtures; importable builders live in
gate_helpers (two test roots share this process, so test modules must
import helpers by a unique module name, never via `conftest`)."""

import pytest

from gate_helpers import ACCEPTANCE_LINES, make_camera


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # Capture hides per-test prints; replay the acceptance verdicts where
    # they survive a piped run.
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def bundle_const_rs():
    """Constant-rate rotation, strong rolling shutter, no translation or
    lens motion: the reference sequence for gyro-path checks."""
    from oisalign.synth import OisModel, Scene, Trajectory, simulate_sequence

    camera = make_camera(t_s=0.8 / 30.0)
    trajectory = Trajectory(
        family="constant", omega0=(0.25, -0.18, 0.3), trans_per_frame=0.0
    )
    return simulate_sequence(
        camera,
        trajectory,
        OisModel(model="none"),
        Scene(),
        n_frames=3,
        seed=11,
        gyro_noise_std=0.0,
    )


@pytest.fixture(scope="session")
def bundle_trans_rs():
    """Constant-rate rotation plus translation: correspondences carry
    parallax, so fundamental estimation is well posed."""
    from oisalign.synth import OisModel, Scene, Trajectory, simulate_sequence

    camera = make_camera(t_s=0.8 / 30.0)
    trajectory = Trajectory(
        family="constant", omega0=(0.22, -0.15, 0.25), trans_per_frame=0.2
    )
    return simulate_sequence(
        camera,
        trajectory,
        OisModel(model="none"),
        Scene(n_points=400),
        n_frames=2,
        seed=5,
        gyro_noise_std=0.0,
    )
