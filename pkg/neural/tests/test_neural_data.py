import json

import numpy as np
import pytest
import torch

from oisneural.data import FlowPairDataset

from flow_builders import smooth_flow, write_manifest


def toy_manifest(tmp_path, n=3, width=16, height=12):
    rng = np.random.default_rng(0)
    flows = [
        (smooth_flow(rng, width, height), smooth_flow(rng, width, height))
        for _ in range(n)
    ]
    return write_manifest(tmp_path, flows), flows


def test_loads_pairs_in_channel_first_order(tmp_path):
    path, flows = toy_manifest(tmp_path)
    ds = FlowPairDataset(path)
    assert len(ds) == 3
    assert ds.keys == ["000000_000001", "000001_000002", "000002_000003"]
    gyro, target = ds[1]
    assert gyro.shape == (2, 12, 16)
    assert gyro.dtype == torch.float32
    assert np.array_equal(gyro[0].numpy(), flows[1][0][..., 0])
    assert np.array_equal(gyro[1].numpy(), flows[1][0][..., 1])
    assert np.array_equal(target[0].numpy(), flows[1][1][..., 0])


def test_empty_manifest_rejected(tmp_path):
    path = tmp_path / "manifest.json"
    with open(path, "w") as fh:
        json.dump({"pairs": []}, fh)
    with pytest.raises(ValueError, match="no pairs"):
        FlowPairDataset(path)


def test_pair_size_mismatch_rejected(tmp_path):
    rng = np.random.default_rng(1)
    flows = [(smooth_flow(rng, 16, 12), smooth_flow(rng, 16, 10))]
    path = write_manifest(tmp_path, flows)
    with pytest.raises(ValueError, match="target"):
        FlowPairDataset(path)


def test_input_size_enforced(tmp_path):
    path, _ = toy_manifest(tmp_path)
    with pytest.raises(ValueError, match="expected 48x32"):
        FlowPairDataset(path, input_size=(48, 32))
    ds = FlowPairDataset(path, input_size=(16, 12))
    assert ds.flow_shape == (12, 16, 2)


def test_inconsistent_sizes_across_pairs_rejected(tmp_path):
    rng = np.random.default_rng(2)
    flows = [
        (smooth_flow(rng, 16, 12), smooth_flow(rng, 16, 12)),
        (smooth_flow(rng, 20, 12), smooth_flow(rng, 20, 12)),
    ]
    path = write_manifest(tmp_path, flows)
    with pytest.raises(ValueError, match="expected 16x12"):
        FlowPairDataset(path)
