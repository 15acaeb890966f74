import numpy as np
import pytest

from oisalign.errors import AnnotationError, FlowFormatError
from oisalign.flowio import FlowField, read_flo, write_flo


def random_flow(rng, width=17, height=11):
    return FlowField(rng.normal(scale=4.0, size=(height, width, 2)).astype(np.float32))


class TestFlowField:
    def test_dimensions_follow_array(self):
        f = FlowField(np.zeros((5, 9, 2), dtype=np.float32))
        assert (f.width, f.height) == (9, 5)

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            FlowField(np.zeros((5, 9, 3), dtype=np.float32))

    def test_rejects_non_finite(self):
        bad = np.zeros((2, 2, 2), dtype=np.float32)
        bad[0, 0, 0] = np.inf
        with pytest.raises(ValueError):
            FlowField(bad)

    def test_sample_bilinear_against_manual(self):
        uv = np.zeros((2, 2, 2), dtype=np.float32)
        uv[0, 0, 0], uv[0, 1, 0], uv[1, 0, 0], uv[1, 1, 0] = 0.0, 4.0, 8.0, 12.0
        f = FlowField(uv)
        got = f.sample(np.array([[0.5, 0.5]]))
        assert np.allclose(got, [[6.0, 0.0]], atol=1e-12)
        corners = f.sample(np.array([[0.0, 0.0], [1.0, 1.0]]))
        assert np.allclose(corners[:, 0], [0.0, 12.0], atol=0)

    def test_sample_far_edge_uses_last_cell(self):
        rng = np.random.default_rng(2)
        f = random_flow(rng)
        pts = np.array([[f.width - 1.0, f.height - 1.0]])
        assert np.allclose(f.sample(pts), f.uv[-1, -1], atol=1e-6)

    def test_sample_outside_raises(self):
        rng = np.random.default_rng(3)
        f = random_flow(rng)
        with pytest.raises(AnnotationError):
            f.sample(np.array([[-0.01, 0.0]]))
        with pytest.raises(AnnotationError):
            f.sample(np.array([[0.0, f.height - 0.5]]))

    def test_endpoint_error(self):
        a = FlowField(np.zeros((4, 4, 2), dtype=np.float32))
        shifted = np.zeros((4, 4, 2), dtype=np.float32)
        shifted[:, :, 0] = 3.0
        shifted[:, :, 1] = 4.0
        b = FlowField(shifted)
        assert a.endpoint_error(b) == 5.0
        assert a.endpoint_error(a) == 0.0

    def test_endpoint_error_requires_matching_dims(self):
        a = FlowField(np.zeros((4, 4, 2), dtype=np.float32))
        b = FlowField(np.zeros((4, 5, 2), dtype=np.float32))
        with pytest.raises(ValueError):
            a.endpoint_error(b)


class TestFloFormat:
    def test_round_trip_is_float32_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        f = random_flow(rng, width=33, height=21)
        path = tmp_path / "field.flo"
        write_flo(path, f)
        back = read_flo(path)
        assert back.width == 33 and back.height == 21
        assert np.array_equal(back.uv, f.uv)

    def test_header_layout(self, tmp_path):
        f = FlowField(np.zeros((2, 3, 2), dtype=np.float32))
        path = tmp_path / "tiny.flo"
        write_flo(path, f)
        blob = path.read_bytes()
        # The float magic 202021.25 stores as the ASCII tag.
        assert blob[:4] == b"PIEH"
        assert int.from_bytes(blob[4:8], "little") == 3
        assert int.from_bytes(blob[8:12], "little") == 2
        assert len(blob) == 12 + 2 * 3 * 2 * 4

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.flo"
        path.write_bytes(b"XXXX" + bytes(16))
        with pytest.raises(FlowFormatError):
            read_flo(path)

    def test_truncated_payload_rejected(self, tmp_path):
        f = FlowField(np.ones((4, 4, 2), dtype=np.float32))
        path = tmp_path / "cut.flo"
        write_flo(path, f)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FlowFormatError):
            read_flo(path)

    def test_nonsense_dimensions_rejected(self, tmp_path):
        path = tmp_path / "dims.flo"
        path.write_bytes(
            b"PIEH"
            + (-3).to_bytes(4, "little", signed=True)
            + (2).to_bytes(4, "little")
        )
        with pytest.raises(FlowFormatError):
            read_flo(path)
