"""Training pairs from an exported manifest.

The manifest is JSON with a ``pairs`` list; each entry names a predicted
flow (``gyro_flow``) and a supervision flow (``target_flow``) by path
relative to the manifest's directory. Everything is loaded eagerly: the
intended scale is hundreds of pairs, not millions.
"""

import json
from pathlib import Path

import torch
from torch.utils.data import Dataset

from .flowio import read_flo


def _to_tensor(uv) -> torch.Tensor:
    # (h, w, 2) -> (2, h, w), contiguous for conv input
    return torch.from_numpy(uv.transpose(2, 0, 1).copy())


class FlowPairDataset(Dataset):
    """(predicted, target) flow tensor pairs, shape (2, h, w) each.

    Args:
        manifest_path: exported manifest JSON.
        input_size: optional (width, height) every flow must match; None
            accepts any single size shared by all pairs.

    Raises:
        ValueError: empty manifest, a pair whose two flows disagree in
            size, or a flow that violates ``input_size`` / the common
            size. All validation happens at construction, before any
            training starts.
    """

    def __init__(self, manifest_path, input_size=None):
        path = Path(manifest_path)
        with open(path, "r", encoding="ascii") as fh:
            manifest = json.load(fh)
        entries = manifest.get("pairs", [])
        if not entries:
            raise ValueError(f"{path}: manifest lists no pairs")
        root = path.parent
        self.keys = []
        self.inputs = []
        self.targets = []
        expected = None
        if input_size is not None:
            width, height = input_size
            expected = (int(height), int(width), 2)
        for entry in entries:
            key = f"{entry['a']:06d}_{entry['b']:06d}"
            gyro = read_flo(root / entry["gyro_flow"])
            target = read_flo(root / entry["target_flow"])
            if gyro.shape != target.shape:
                raise ValueError(
                    f"pair {key}: predicted flow is "
                    f"{gyro.shape[1]}x{gyro.shape[0]} but target is "
                    f"{target.shape[1]}x{target.shape[0]}"
                )
            if expected is None:
                expected = gyro.shape
            if gyro.shape != expected:
                raise ValueError(
                    f"pair {key}: flow is {gyro.shape[1]}x{gyro.shape[0]}, "
                    f"expected {expected[1]}x{expected[0]}"
                )
            self.keys.append(key)
            self.inputs.append(_to_tensor(gyro))
            self.targets.append(_to_tensor(target))
        self.flow_shape = expected

    def __len__(self) -> int:
        return len(self.keys)

    def __getitem__(self, index):
        return self.inputs[index], self.targets[index]
