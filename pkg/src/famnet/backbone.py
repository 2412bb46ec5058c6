"""2D and 3D ResNet18 trunks that expose every residual block output.

The eight taps ``taps[i][j]`` (stage ``i`` in 1..4, block ``j`` in 1..2) are
what the attention stacks consume. Tensors use the native PyTorch layouts:
``(B, C, H, W)`` for 2D and ``(B, C, D, H, W)`` for 3D.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

STAGE_CHANNELS = (64, 128, 256, 512)


def scaled_channels(width: float) -> tuple[int, ...]:
    return tuple(max(1, int(round(c * width))) for c in STAGE_CHANNELS)


def _layers(dims: int):
    if dims == 2:
        return nn.Conv2d, nn.BatchNorm2d, nn.MaxPool2d
    if dims == 3:
        return nn.Conv3d, nn.BatchNorm3d, nn.MaxPool3d
    raise ValueError(f"dims must be 2 or 3, got {dims}")


class BasicBlock(nn.Module):
    def __init__(self, dims: int, in_ch: int, out_ch: int, stride: int = 1):
        super().__init__()
        conv, norm, _ = _layers(dims)
        self.conv1 = conv(in_ch, out_ch, 3, stride=stride, padding=1, bias=False)
        self.bn1 = norm(out_ch)
        self.conv2 = conv(out_ch, out_ch, 3, stride=1, padding=1, bias=False)
        self.bn2 = norm(out_ch)
        self.relu = nn.ReLU(inplace=True)
        self.downsample = None
        if stride != 1 or in_ch != out_ch:
            self.downsample = nn.Sequential(
                conv(in_ch, out_ch, 1, stride=stride, bias=False), norm(out_ch)
            )

    def forward(self, x):
        identity = x if self.downsample is None else self.downsample(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + identity)


@dataclass
class FeatureTaps:
    """Block outputs indexed as ``taps[i][j]`` with 1-based stage/block ids."""

    blocks: list[tuple[torch.Tensor, torch.Tensor]]

    def __getitem__(self, stage: int) -> dict[int, torch.Tensor]:
        if not 1 <= stage <= 4:
            raise IndexError(f"stage must be in 1..4, got {stage}")
        first, second = self.blocks[stage - 1]
        return {1: first, 2: second}

    def shapes(self) -> dict[tuple[int, int], tuple[int, ...]]:
        """Per-sample shapes (batch axis dropped)."""
        return {
            (i + 1, j + 1): tuple(t.shape[1:])
            for i, pair in enumerate(self.blocks)
            for j, t in enumerate(pair)
        }


class ResNet18Trunk(nn.Module):
    """ResNet18 without its classifier, for ``dims`` of 2 (images) or 3 (clips).

    The 3D stem uses a 7x7x7 kernel with temporal stride 1, and stages 2-4
    halve depth as well as height/width, so final depth is ``d / 8``.
    """

    def __init__(self, dims: int = 2, width: float = 1.0, in_channels: int = 3):
        super().__init__()
        conv, norm, pool = _layers(dims)
        self.dims = dims
        self.width = width
        self.channels = scaled_channels(width)
        stem_stride = 2 if dims == 2 else (1, 2, 2)
        pool_stride = 2 if dims == 2 else (1, 2, 2)
        self.conv1 = conv(in_channels, self.channels[0], 7, stride=stem_stride, padding=3, bias=False)
        self.bn1 = norm(self.channels[0])
        self.relu = nn.ReLU(inplace=True)
        self.maxpool = pool(3, stride=pool_stride, padding=1)

        stages = []
        in_ch = self.channels[0]
        for i, out_ch in enumerate(self.channels):
            stride = 1 if i == 0 else 2
            stages.append(nn.ModuleList([
                BasicBlock(dims, in_ch, out_ch, stride),
                BasicBlock(dims, out_ch, out_ch, 1),
            ]))
            in_ch = out_ch
        self.stages = nn.ModuleList(stages)
        self.reset_parameters()

    def reset_parameters(self):
        for m in self.modules():
            if isinstance(m, (nn.Conv2d, nn.Conv3d)):
                nn.init.kaiming_normal_(m.weight, mode="fan_out", nonlinearity="relu")
            elif isinstance(m, (nn.BatchNorm2d, nn.BatchNorm3d)):
                nn.init.ones_(m.weight)
                nn.init.zeros_(m.bias)

    def _check_input(self, x: torch.Tensor):
        if x.dim() != self.dims + 2:
            raise ValueError(
                f"expected a batched {self.dims + 2}-D tensor, got shape {tuple(x.shape)}"
            )
        if x.shape[1] != self.conv1.in_channels:
            raise ValueError(f"expected {self.conv1.in_channels} channels, got {x.shape[1]}")
        if self.dims == 3 and x.shape[2] < 8:
            raise ValueError(f"clip depth must be >= 8, got {x.shape[2]}")

    def forward(self, x: torch.Tensor) -> FeatureTaps:
        self._check_input(x)
        x = self.maxpool(self.relu(self.bn1(self.conv1(x))))
        blocks = []
        for first, second in self.stages:
            a = first(x)
            x = second(a)
            blocks.append((a, x))
        return FeatureTaps(blocks)


def backbone2d(width: float = 1.0) -> ResNet18Trunk:
    return ResNet18Trunk(dims=2, width=width)


def backbone3d(width: float = 1.0) -> ResNet18Trunk:
    return ResNet18Trunk(dims=3, width=width)
