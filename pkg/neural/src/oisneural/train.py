"""Training loop: mean endpoint-error regression with a stepped schedule."""

import csv
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch.utils.data import DataLoader

from .data import FlowPairDataset
from .model import FlowUNet

CHECKPOINT_NAME = "model.pt"
CURVE_NAME = "curve.csv"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 8
    decay_factor: float = 0.8
    decay_every_epochs: int = 50
    input_size: tuple = (360, 270)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("momentum parameters must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")
        if not 0 < self.decay_factor <= 1:
            raise ValueError("decay factor must lie in (0, 1]")
        if self.decay_every_epochs < 1:
            raise ValueError("decay interval must be at least 1 epoch")


def epe_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean endpoint error: Euclidean distance per pixel, averaged."""
    return torch.mean(torch.linalg.vector_norm(pred - target, dim=1))


def train(
    manifest_path,
    cfg: TrainConfig,
    out_dir,
    epochs: int,
    max_steps: int | None = None,
    seed: int = 0,
    base_channels: int = 32,
    levels: int = 4,
    device: str = "cpu",
    log=None,
) -> Path:
    """Fit a FlowUNet on the manifest's pairs; write checkpoint and curve.

    Returns the checkpoint path. The curve CSV has one row per step with
    columns step, epoch, lr, loss. With a fixed seed the first-step loss
    is bit-reproducible.
    """
    if epochs < 1:
        raise ValueError("epochs must be at least 1")
    dataset = FlowPairDataset(manifest_path, input_size=cfg.input_size)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(seed)
    model = FlowUNet(base_channels=base_channels, levels=levels).to(device)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=cfg.learning_rate, betas=(cfg.beta1, cfg.beta2)
    )
    scheduler = torch.optim.lr_scheduler.StepLR(
        optimizer, step_size=cfg.decay_every_epochs, gamma=cfg.decay_factor
    )
    loader = DataLoader(
        dataset,
        batch_size=cfg.batch_size,
        shuffle=True,
        generator=torch.Generator().manual_seed(seed),
    )
    rows = []
    step = 0
    model.train()
    for epoch in range(epochs):
        for inputs, targets in loader:
            step += 1
            optimizer.zero_grad()
            loss = epe_loss(model(inputs.to(device)), targets.to(device))
            loss.backward()
            optimizer.step()
            rows.append((step, epoch, optimizer.param_groups[0]["lr"], loss.item()))
            if log is not None and (step == 1 or step % 25 == 0):
                log(f"step {step} epoch {epoch} loss {loss.item():.4f}")
            if max_steps is not None and step >= max_steps:
                break
        scheduler.step()
        if max_steps is not None and step >= max_steps:
            break

    with open(out / CURVE_NAME, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "epoch", "lr", "loss"])
        writer.writerows(rows)
    checkpoint = out / CHECKPOINT_NAME
    torch.save(
        {
            "state_dict": model.state_dict(),
            "base_channels": base_channels,
            "levels": levels,
            "residual": True,
            "config": asdict(cfg),
            "seed": seed,
            "epochs": epochs,
            "steps": step,
            "final_loss": rows[-1][3],
        },
        checkpoint,
    )
    return checkpoint
