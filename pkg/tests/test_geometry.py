"""Rotation, homography, and flow-synthesis core checks."""

import numpy as np
import pytest

from oisalign.errors import DegenerateWarpError
from oisalign.geometry import (
    HomographyArray,
    apply_homography,
    compose_rotations,
    homography_array_to_flow,
    is_rotation,
    load_homography_array,
    nearest_rotation,
    normalize_homography,
    orthonormality_drift,
    rodrigues,
    rodrigues_many,
    rotation_angle,
    rotation_geodesic,
    rotation_to_homography,
    save_homography_array,
    skew,
)

from gate_helpers import make_intrinsics, random_rotation


class TestRodrigues:
    def test_zero_vector_is_identity_exactly(self):
        assert np.array_equal(rodrigues(np.zeros(3)), np.eye(3))

    def test_quarter_turn_about_z(self):
        expected = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        assert np.allclose(rodrigues([0.0, 0.0, np.pi / 2]), expected, atol=1e-12)

    def test_trace_identity_at_fixed_angle(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            r = random_rotation(rng, 0.3)
            assert abs(np.trace(r) - (1.0 + 2.0 * np.cos(0.3))) < 1e-12

    def test_inverse_pairs_up_to_pi(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            v = rng.normal(size=3)
            v *= rng.uniform(0.0, np.pi) / np.linalg.norm(v)
            prod = rodrigues(v) @ rodrigues(-v)
            assert np.linalg.norm(prod - np.eye(3)) < 1e-9

    def test_result_is_rotation(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            assert is_rotation(rodrigues(rng.normal(size=3)))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            rodrigues([np.nan, 0.0, 0.0])

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(13)
        vecs = rng.normal(size=(40, 3))
        batch = rodrigues_many(vecs)
        for i in range(vecs.shape[0]):
            assert np.allclose(batch[i], rodrigues(vecs[i]), atol=1e-15)

    def test_angle_recovery(self):
        rng = np.random.default_rng(17)
        for _ in range(30):
            angle = rng.uniform(1e-6, np.pi - 1e-6)
            r = random_rotation(rng, angle)
            assert abs(rotation_angle(r) - angle) < 1e-9

    def test_geodesic_between_known_rotations(self):
        a = rodrigues([0.0, 0.0, 0.2])
        b = rodrigues([0.0, 0.0, 0.5])
        assert abs(rotation_geodesic(a, b) - 0.3) < 1e-9


class TestRotationHelpers:
    def test_skew_reproduces_cross_product(self):
        rng = np.random.default_rng(19)
        v, w = rng.normal(size=3), rng.normal(size=3)
        assert np.allclose(skew(v) @ w, np.cross(v, w), atol=1e-15)
        assert np.array_equal(skew(v), -skew(v).T)

    def test_nearest_rotation_cleans_drift(self):
        rng = np.random.default_rng(23)
        r = random_rotation(rng, 0.4)
        dirty = r + rng.normal(scale=1e-4, size=(3, 3))
        clean = nearest_rotation(dirty)
        assert is_rotation(clean)
        assert rotation_geodesic(clean, r) < 1e-3

    def test_drift_measure_zero_on_exact_rotation(self):
        assert orthonormality_drift(np.eye(3)) == 0.0


class TestComposeRotations:
    def test_identities(self):
        assert np.allclose(compose_rotations([np.eye(3)] * 3), np.eye(3), atol=0)

    def test_same_axis_additivity(self):
        a, b = 0.3, 0.45
        got = compose_rotations([rodrigues([0, 0, a]), rodrigues([0, 0, b])])
        assert np.allclose(got, rodrigues([0, 0, a + b]), atol=1e-12)

    def test_hundred_random_factors_stay_orthonormal(self):
        rng = np.random.default_rng(29)
        mats = [random_rotation(rng, rng.uniform(0.001, 0.05)) for _ in range(100)]
        prod = compose_rotations(mats)
        assert orthonormality_drift(prod) < 1e-9

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            compose_rotations([])


class TestRotationToHomography:
    def test_identity_rotation_gives_identity(self):
        intr = make_intrinsics()
        assert np.allclose(rotation_to_homography(np.eye(3), intr), np.eye(3), atol=0)

    def test_z_rotation_with_centered_k_is_in_plane(self):
        from oisalign.geometry import CameraIntrinsics

        theta = 0.3
        intr = CameraIntrinsics(fx=400.0, fy=400.0, cx=0.0, cy=0.0)
        h = rotation_to_homography(rodrigues([0, 0, theta]), intr)
        # diag(f, f, 1) commutes with rot_z, so H is the plane rotation.
        pts = np.array([[10.0, 0.0], [0.0, 25.0], [7.0, -3.0]])
        c, s = np.cos(theta), np.sin(theta)
        rot2d = np.array([[c, -s], [s, c]])
        assert np.allclose(apply_homography(h, pts), pts @ rot2d.T, atol=1e-9)

    def test_points_at_infinity_oracle(self):
        intr = make_intrinsics()
        r = rodrigues([0.0, 0.05, 0.0])
        h = rotation_to_homography(r, intr)
        k = intr.matrix
        kinv = intr.inverse
        xs, ys = np.meshgrid(np.linspace(0, 639, 9), np.linspace(0, 479, 7))
        pts = np.column_stack([xs.ravel(), ys.ravel()])
        warped = apply_homography(h, pts)
        # Independent path: treat each pixel as a direction, rotate the ray,
        # and project it back.
        rays = np.column_stack([pts, np.ones(len(pts))]) @ kinv.T
        rot = rays @ r.T
        proj = rot @ k.T
        proj = proj[:, :2] / proj[:, 2:3]
        assert np.max(np.abs(warped - proj)) < 1e-6

    def test_h22_normalized(self):
        intr = make_intrinsics()
        rng = np.random.default_rng(31)
        h = rotation_to_homography(random_rotation(rng, 0.2), intr)
        assert h[2, 2] == 1.0


class TestNormalizeHomography:
    def test_scales_when_h22_usable(self):
        h = 2.0 * np.eye(3)
        assert np.allclose(normalize_homography(h), np.eye(3), atol=0)

    def test_leaves_degenerate_h22_alone(self):
        h = np.eye(3)
        h[2, 2] = 1e-14
        out = normalize_homography(h)
        assert out[2, 2] == 1e-14

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError):
            normalize_homography(np.eye(4))


class TestApplyHomography:
    def test_identity(self):
        pts = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(apply_homography(np.eye(3), pts), pts)

    def test_translation(self):
        h = np.eye(3)
        h[0, 2], h[1, 2] = 3.0, -2.0
        pts = np.array([[10.0, 20.0]])
        assert np.allclose(apply_homography(h, pts), [[13.0, 18.0]], atol=0)


class TestHomographyArray:
    def test_patch_row_ranges(self):
        arr = HomographyArray(np.stack([np.eye(3)] * 6), 480)
        assert arr.patch_of_row(0) == 0
        assert arr.patch_of_row(79) == 0
        assert arr.patch_of_row(80) == 1
        assert arr.patch_of_row(479) == 5
        assert np.allclose(arr.boundaries(), np.arange(7) * 80.0, atol=0)
        assert np.allclose(arr.centers(), np.arange(6) * 80.0 + 40.0, atol=0)

    def test_needs_at_least_one_patch(self):
        with pytest.raises(ValueError):
            HomographyArray(np.zeros((0, 3, 3)), 480)

    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(37)
        mats = np.stack([np.eye(3) + rng.normal(scale=0.01, size=(3, 3)) for _ in range(6)])
        arr = HomographyArray(mats, 480)
        path = tmp_path / "arr.json"
        save_homography_array(path, arr)
        back = load_homography_array(path)
        assert back.frame_height == 480
        assert np.array_equal(back.mats, arr.mats)


class TestFlowSynthesis:
    def test_identity_array_zero_flow_exact(self):
        arr = HomographyArray(np.stack([np.eye(3)] * 6), 96)
        flow = homography_array_to_flow(arr, 128, 96)
        assert flow.width == 128 and flow.height == 96
        assert np.all(flow.uv == 0.0)

    def test_pure_translation_constant_flow(self):
        h = np.eye(3)
        h[0, 2], h[1, 2] = 3.0, -2.0
        arr = HomographyArray(h[None], 64)
        flow = homography_array_to_flow(arr, 80, 64)
        assert np.all(flow.uv[:, :, 0] == 3.0)
        assert np.all(flow.uv[:, :, 1] == -2.0)

    def test_distinct_patches_respect_hard_boundaries(self):
        mats = np.stack([np.eye(3), np.eye(3)])
        mats[0, 0, 2] = 1.0
        mats[1, 0, 2] = 5.0
        flow = homography_array_to_flow(HomographyArray(mats, 60), 40, 60)
        assert np.all(flow.uv[:30, :, 0] == 1.0)
        assert np.all(flow.uv[30:, :, 0] == 5.0)

    def test_constant_rate_sequence_matches_simulator(self, bundle_const_rs):
        pair = bundle_const_rs.pairs[0]
        camera = bundle_const_rs.camera
        flow = homography_array_to_flow(
            pair.gt_arrays, camera.width, camera.height
        )
        assert np.max(np.abs(flow.uv - pair.gt_flow.uv)) < 1e-6

    def test_degenerate_warp_reports_patch(self):
        mats = np.stack([np.eye(3)] * 3)
        # Row 2 of patch 1 zeroes the projective depth at image row y = 20.
        mats[1, 2, :] = [0.0, -1.0 / 20.0, 1.0]
        with pytest.raises(DegenerateWarpError) as err:
            homography_array_to_flow(HomographyArray(mats, 60), 16, 60)
        assert err.value.patch == 1

    def test_interpolated_mode_blends_between_centers(self):
        mats = np.stack([np.eye(3), np.eye(3)])
        mats[0, 0, 2] = 2.0
        mats[1, 0, 2] = 6.0
        arr = HomographyArray(mats, 80)
        flow = homography_array_to_flow(arr, 8, 80, interpolate=True)
        # Patch centers sit at rows 20 and 60; halfway between them the two
        # translations blend evenly, outside them the nearer patch rules.
        assert np.allclose(flow.uv[20, :, 0], 2.0, atol=1e-6)
        assert np.allclose(flow.uv[60, :, 0], 6.0, atol=1e-6)
        assert np.allclose(flow.uv[40, :, 0], 4.0, atol=1e-6)
        assert np.allclose(flow.uv[0, :, 0], 2.0, atol=1e-6)
        assert np.allclose(flow.uv[79, :, 0], 6.0, atol=1e-6)
