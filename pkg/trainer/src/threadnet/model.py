"""Two-stage twin estimator for gradient road maps.

Each branch stacks a residual downsampling encoder with skip-connected
decoders: stage 1 predicts the initial gradient map plus a 3-class overlap
map from the image, stage 2 refines the gradient map from the image, the
overlap map and the initial estimate stacked channel-wise. The conjugate
branch is an independent twin with the identical architecture. Channel
counts are toy-sized, with three downsampling stages (factor 8).
"""

from __future__ import annotations

from typing import NamedTuple

import torch
from torch import nn
from torch.nn import functional as F

DOWNSAMPLE_FACTOR = 8
IMAGE_CHANNELS = 3
OVERLAP_CLASSES = 3
# Stage-2 input: image, overlap distribution, initial gradient map.
STAGE2_CHANNELS = IMAGE_CHANNELS + OVERLAP_CLASSES + 1

_GN_GROUPS = 4


class _ConvBlock(nn.Module):
    """3x3 convolution + group norm + ReLU (group norm suits batch size 1)."""

    def __init__(self, c_in: int, c_out: int, stride: int = 1):
        super().__init__()
        self.conv = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1, bias=False)
        self.norm = nn.GroupNorm(_GN_GROUPS, c_out)

    def forward(self, x):
        return F.relu(self.norm(self.conv(x)), inplace=True)


class _ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.norm1 = nn.GroupNorm(_GN_GROUPS, channels)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.norm2 = nn.GroupNorm(_GN_GROUPS, channels)

    def forward(self, x):
        h = F.relu(self.norm1(self.conv1(x)), inplace=True)
        h = self.norm2(self.conv2(h))
        return F.relu(x + h, inplace=True)


class _Head(nn.Module):
    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.conv = nn.Conv2d(c_in, c_in, 3, padding=1)
        self.project = nn.Conv2d(c_in, c_out, 1)

    def forward(self, x):
        return self.project(F.relu(self.conv(x), inplace=True))


class _StageNet(nn.Module):
    """Residual encoder with a skip-connected decoder and bounded heads."""

    def __init__(self, in_channels: int, with_overlap_head: bool, base: int = 8):
        super().__init__()
        c0, c1, c2, c3 = base, 2 * base, 4 * base, 6 * base
        self.stem = _ConvBlock(in_channels, c0)
        self.down1 = _ConvBlock(c0, c1, stride=2)
        self.res1 = _ResidualBlock(c1)
        self.down2 = _ConvBlock(c1, c2, stride=2)
        self.res2 = _ResidualBlock(c2)
        self.down3 = _ConvBlock(c2, c3, stride=2)
        self.res3 = _ResidualBlock(c3)
        self.up2 = _ConvBlock(c3, c2)
        self.fuse2 = _ConvBlock(2 * c2, c2)
        self.up1 = _ConvBlock(c2, c1)
        self.fuse1 = _ConvBlock(2 * c1, c1)
        self.up0 = _ConvBlock(c1, c0)
        self.fuse0 = _ConvBlock(2 * c0, c0)
        self.gradient_head = _Head(c0, 1)
        self.overlap_head = _Head(c0, OVERLAP_CLASSES) if with_overlap_head else None

    @staticmethod
    def _up(x):
        return F.interpolate(x, scale_factor=2, mode="nearest")

    def forward(self, x) -> tuple[torch.Tensor, torch.Tensor | None]:
        s0 = self.stem(x)
        s1 = self.res1(self.down1(s0))
        s2 = self.res2(self.down2(s1))
        h = self.res3(self.down3(s2))
        h = self.fuse2(torch.cat([self.up2(self._up(h)), s2], dim=1))
        h = self.fuse1(torch.cat([self.up1(self._up(h)), s1], dim=1))
        h = self.fuse0(torch.cat([self.up0(self._up(h)), s0], dim=1))
        gradient = torch.sigmoid(self.gradient_head(h))
        overlap = None
        if self.overlap_head is not None:
            overlap = torch.softmax(self.overlap_head(h), dim=1)
        return gradient, overlap


class _Branch(nn.Module):
    """One two-stage estimator: initial gradient + overlap, then refinement."""

    def __init__(self, base: int = 8):
        super().__init__()
        self.stage1 = _StageNet(IMAGE_CHANNELS, with_overlap_head=True, base=base)
        self.stage2 = _StageNet(STAGE2_CHANNELS, with_overlap_head=False, base=base)

    def forward(self, x) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        gradient, overlap = self.stage1(x)
        stacked = torch.cat([x, overlap, gradient], dim=1)
        refined, _ = self.stage2(stacked)
        return gradient, overlap, refined


class DmsdOutputs(NamedTuple):
    gradient: torch.Tensor
    overlap: torch.Tensor
    refined: torch.Tensor
    conj_gradient: torch.Tensor
    conj_overlap: torch.Tensor
    conj_refined: torch.Tensor


class DmsdModel(nn.Module):
    """Twin two-stage estimators; the conjugate twin has independent weights."""

    def __init__(self, base_channels: int = 8):
        super().__init__()
        if base_channels < _GN_GROUPS or base_channels % _GN_GROUPS:
            raise ValueError(f"base_channels must be a positive multiple of {_GN_GROUPS}")
        self.branch = _Branch(base_channels)
        self.conj_branch = _Branch(base_channels)

    def forward(self, x: torch.Tensor) -> DmsdOutputs:
        if x.ndim != 4 or x.shape[1] != IMAGE_CHANNELS:
            raise ValueError(f"expected (B, {IMAGE_CHANNELS}, H, W) input, got {tuple(x.shape)}")
        if x.shape[2] % DOWNSAMPLE_FACTOR or x.shape[3] % DOWNSAMPLE_FACTOR:
            raise ValueError(f"input height and width must be divisible by {DOWNSAMPLE_FACTOR}")
        g, o, refined = self.branch(x)
        gc, oc, conj_refined = self.conj_branch(x)
        return DmsdOutputs(g, o, refined, gc, oc, conj_refined)
