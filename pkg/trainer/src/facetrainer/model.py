"""Small CNN encoder plus MLP regression head, 30 outputs."""

from __future__ import annotations

import torch
from torch import nn


class ControlRegressor(nn.Module):
    """Five stride-2 conv blocks followed by a two-hidden-layer ReLU MLP.

    Input: (n, 1, s, s) grayscale in [0, 1]; output: (n, 30) raw control
    values (clamping to registry ranges happens at export time).
    """

    def __init__(self, input_size: int = 64):
        super().__init__()
        chans = [1, 16, 32, 64, 128, 128]
        blocks = []
        for cin, cout in zip(chans[:-1], chans[1:]):
            blocks += [
                nn.Conv2d(cin, cout, kernel_size=3, stride=2, padding=1),
                nn.BatchNorm2d(cout),
                nn.ReLU(inplace=True),
            ]
        self.encoder = nn.Sequential(*blocks)
        spatial = input_size // 2**5
        if spatial < 1:
            raise ValueError(f"input_size {input_size} too small for 5 stride-2 blocks")
        feat = chans[-1] * spatial * spatial
        self.head = nn.Sequential(
            nn.Flatten(),
            nn.Linear(feat, 256),
            nn.ReLU(inplace=True),
            nn.Linear(256, 256),
            nn.ReLU(inplace=True),
            nn.Linear(256, 30),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.encoder(x))
