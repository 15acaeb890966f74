"""Checkpoint loading and file-to-file inference."""

from pathlib import Path

import numpy as np
import torch

from .flowio import read_flo, write_flo
from .model import FlowUNet


def load_checkpoint(path, device: str = "cpu") -> FlowUNet:
    payload = torch.load(path, map_location=device, weights_only=True)
    model = FlowUNet(
        base_channels=payload["base_channels"], levels=payload["levels"]
    )
    model.load_state_dict(payload["state_dict"])
    model.to(device)
    model.eval()
    return model


def refine_flow(model: FlowUNet, uv: np.ndarray) -> np.ndarray:
    """Run one (h, w, 2) flow through the model; returns float32."""
    tensor = torch.from_numpy(
        np.ascontiguousarray(uv.transpose(2, 0, 1), dtype=np.float32)
    ).unsqueeze(0)
    with torch.no_grad():
        out = model(tensor)
    return out.squeeze(0).numpy().transpose(1, 2, 0).astype(np.float32)


def refine_file(model: FlowUNet, in_path, out_path) -> Path:
    out_path = Path(out_path)
    write_flo(out_path, refine_flow(model, read_flo(in_path)))
    return out_path
