"""Encoder-decoder flow regressor.

A UNet over 2-channel flow rasters: 4 pooling levels, base width 32,
doubling per level, skip connections across each level. The head predicts
a residual added to the input flow; the mapping is near-identity, so the
network only has to model the discrepancy. Inputs of any size are
accepted: the forward pass pads to the pooling granularity and crops the
result back.
"""

import torch
import torch.nn.functional as F
from torch import nn


class _DoubleConv(nn.Module):
    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(c_in, c_out, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(c_out, c_out, 3, padding=1),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.net(x)


class FlowUNet(nn.Module):
    """Residual flow refiner: output = input + predicted correction."""

    def __init__(self, base_channels: int = 32, levels: int = 4):
        super().__init__()
        if base_channels < 1 or levels < 1:
            raise ValueError("base_channels and levels must be positive")
        self.base_channels = base_channels
        self.levels = levels
        self.encoders = nn.ModuleList()
        ch = 2
        for i in range(levels):
            self.encoders.append(_DoubleConv(ch, base_channels * 2**i))
            ch = base_channels * 2**i
        self.bottleneck = _DoubleConv(ch, ch * 2)
        self.upsamplers = nn.ModuleList()
        self.decoders = nn.ModuleList()
        ch = ch * 2
        for i in reversed(range(levels)):
            out = base_channels * 2**i
            self.upsamplers.append(nn.ConvTranspose2d(ch, out, 2, stride=2))
            self.decoders.append(_DoubleConv(out * 2, out))
            ch = out
        self.head = nn.Conv2d(ch, 2, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != 2:
            raise ValueError(f"expected (n, 2, h, w) input, got {tuple(x.shape)}")
        height, width = x.shape[2], x.shape[3]
        grain = 2**self.levels
        pad_h = (grain - height % grain) % grain
        pad_w = (grain - width % grain) % grain
        h = F.pad(x, (0, pad_w, 0, pad_h), mode="replicate") if pad_h or pad_w else x
        skips = []
        for encoder in self.encoders:
            h = encoder(h)
            skips.append(h)
            h = F.max_pool2d(h, 2)
        h = self.bottleneck(h)
        for upsample, decoder, skip in zip(
            self.upsamplers, self.decoders, reversed(skips)
        ):
            h = upsample(h)
            h = decoder(torch.cat([h, skip], dim=1))
        delta = self.head(h)[:, :, :height, :width]
        return x + delta
