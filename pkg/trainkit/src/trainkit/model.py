"""Compact U-Net for fringe-to-depth regression at desk scale.

Four encoder stages with skip connections into the decoder, tanh output in
[-1, 1]. Sized for 64 to 256 pixel inputs; the base width is kept small so
the full ablation protocol stays fast on a single CPU core.
"""

from __future__ import annotations

import torch
from torch import nn

BASE_WIDTH = 16
N_STAGES = 4


class _DoubleConv(nn.Module):
    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv2d(c_in, c_out, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(c_out, c_out, 3, padding=1),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.block(x)


class FringeToDepthNet(nn.Module):
    def __init__(self, image_size: int):
        super().__init__()
        if image_size < 64 or image_size & (image_size - 1):
            raise ValueError(f"image_size must be a power of two >= 64, got {image_size}")
        widths = [BASE_WIDTH * 2**i for i in range(N_STAGES)]
        self.encoders = nn.ModuleList()
        c_prev = 1
        for c in widths:
            self.encoders.append(_DoubleConv(c_prev, c))
            c_prev = c
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = _DoubleConv(widths[-1], widths[-1] * 2)
        self.upsamplers = nn.ModuleList()
        self.decoders = nn.ModuleList()
        c_prev = widths[-1] * 2
        for c in reversed(widths):
            self.upsamplers.append(nn.ConvTranspose2d(c_prev, c, 2, stride=2))
            self.decoders.append(_DoubleConv(2 * c, c))
            c_prev = c
        self.head = nn.Conv2d(widths[0], 1, 1)

    def forward(self, x):
        skips = []
        for enc in self.encoders:
            x = enc(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for up, dec, skip in zip(self.upsamplers, self.decoders, reversed(skips)):
            x = up(x)
            x = dec(torch.cat([x, skip], dim=1))
        return torch.tanh(self.head(x))

    @property
    def n_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())


def build_model(image_size: int) -> FringeToDepthNet:
    """Encoder-decoder with skip connections; output matches input size."""
    return FringeToDepthNet(image_size)
