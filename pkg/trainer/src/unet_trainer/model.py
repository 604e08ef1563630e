"""Desk-scale U-Net: pooled stem, three encoder levels, skip connections.

Input spatial size is fixed at 256 x 256 while the channel count varies per
satellite (2 for Sentinel-1, 5 for Sentinel-2, 4 for Landsat-8).  A 4x
average-pool stem keeps the convolution budget small enough for CPU
training; the decoder mirrors the encoder through concatenated skips and a
bilinear head restores full resolution.  The output is one sigmoid
probability plane.
"""

from __future__ import annotations

import torch
from torch import nn

CHANNELS_BY_SATELLITE = {"Sentinel1": 2, "Sentinel2": 5, "Landsat8": 4}


def _block(c_in: int, c_out: int) -> nn.Sequential:
    return nn.Sequential(nn.Conv2d(c_in, c_out, 3, padding=1), nn.ReLU(inplace=True))


class SegmentationUNet(nn.Module):
    def __init__(self, in_channels: int, widths=(4, 8, 16)):
        super().__init__()
        w1, w2, w3 = widths
        self.in_channels = in_channels
        self.widths = tuple(widths)
        self.stem = nn.AvgPool2d(4)
        self.enc1 = _block(in_channels, w1)           # 64 x 64
        self.enc2 = _block(w1, w2)                    # 32 x 32
        self.bottleneck = _block(w2, w3)              # 16 x 16
        self.pool = nn.MaxPool2d(2)
        self.up = nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False)
        self.dec2 = _block(w3 + w2, w2)               # 32 x 32
        self.dec1 = _block(w2 + w1, w1)               # 64 x 64
        self.head = nn.Conv2d(w1, 1, 1)
        self.restore = nn.Upsample(scale_factor=4, mode="bilinear", align_corners=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.in_channels:
            raise ValueError(
                f"model expects {self.in_channels} input channels, got {x.shape[1]}"
            )
        x = self.stem(x)
        e1 = self.enc1(x)
        e2 = self.enc2(self.pool(e1))
        b = self.bottleneck(self.pool(e2))
        d2 = self.dec2(torch.cat([self.up(b), e2], dim=1))
        d1 = self.dec1(torch.cat([self.up(d2), e1], dim=1))
        return torch.sigmoid(self.restore(self.head(d1)))


def save_model(model: SegmentationUNet, satellite: str, path) -> None:
    torch.save(
        {
            "satellite": satellite,
            "in_channels": model.in_channels,
            "widths": model.widths,
            "state_dict": model.state_dict(),
        },
        path,
    )


def load_model(path) -> tuple[SegmentationUNet, str]:
    blob = torch.load(path, map_location="cpu", weights_only=True)
    model = SegmentationUNet(in_channels=blob["in_channels"], widths=tuple(blob["widths"]))
    model.load_state_dict(blob["state_dict"])
    model.eval()
    return model, blob["satellite"]
