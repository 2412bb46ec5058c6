"""Hierarchical attention: four chained per-stage modules per task.

Stage 1 computes ``M1 = softmax(conv(tap[1][1]))`` and gates
``F1 = tap[1][2] * M1``. Later stages feed the channel concatenation of the
(pooled) previous gated feature and ``tap[k][1]`` through their convolution.
The softmax runs over all spatial (spatio-temporal in 3D) positions,
independently for each channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .backbone import FeatureTaps


def position_softmax(logits: torch.Tensor) -> torch.Tensor:
    """Softmax over every axis after the channel axis, per (sample, channel)."""
    flat = logits.flatten(2)
    return flat.softmax(dim=-1).view_as(logits)


def match_positions(feature: torch.Tensor, target_shape: torch.Size) -> torch.Tensor:
    """Average-pool ``feature`` so its non-channel axes match ``target_shape``."""
    src, dst = feature.shape[2:], tuple(target_shape[2:])
    if tuple(src) == dst:
        return feature
    if len(src) != len(dst):
        raise ValueError(f"rank mismatch: {tuple(feature.shape)} vs {tuple(target_shape)}")
    kernel = tuple(math.ceil(s / d) for s, d in zip(src, dst))
    pool = F.avg_pool2d if len(src) == 2 else F.avg_pool3d
    out = pool(feature, kernel_size=kernel, stride=kernel, ceil_mode=True)
    if tuple(out.shape[2:]) != dst:
        raise ValueError(f"cannot pool {tuple(src)} onto {dst}")
    return out


class AttentionModule(nn.Module):
    """1x1 (1x1x1) convolution followed by the per-channel position softmax."""

    def __init__(self, dims: int, in_channels: int, out_channels: int):
        super().__init__()
        conv = nn.Conv2d if dims == 2 else nn.Conv3d
        self.dims = dims
        self.conv = conv(in_channels, out_channels, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return position_softmax(self.conv(x))


def _check_pair(tap1: torch.Tensor, tap2: torch.Tensor):
    if tap1.shape != tap2.shape:
        raise ValueError(f"block taps differ in shape: {tuple(tap1.shape)} vs {tuple(tap2.shape)}")


def attention_first(module: AttentionModule, tap1: torch.Tensor, tap2: torch.Tensor):
    """Stage-1 attention: returns ``(M1, F1)``."""
    _check_pair(tap1, tap2)
    m = module(tap1)
    return m, tap2 * m


def attention_step(module: AttentionModule, f_prev: torch.Tensor, tap1: torch.Tensor, tap2: torch.Tensor):
    """Stage-k attention for k >= 2: returns ``(Mk, Fk)``."""
    _check_pair(tap1, tap2)
    if f_prev.shape[0] != tap1.shape[0]:
        raise ValueError("batch size of the previous gated feature does not match the taps")
    x = torch.cat([match_positions(f_prev, tap1.shape), tap1], dim=1)
    if x.shape[1] != module.conv.in_channels:
        raise ValueError(f"attention conv expects {module.conv.in_channels} channels, got {x.shape[1]}")
    m = module(x)
    if m.shape != tap2.shape:
        raise ValueError(f"attention map {tuple(m.shape)} does not match tap {tuple(tap2.shape)}")
    return m, tap2 * m


@dataclass
class AttentionState:
    task: str
    maps: list[torch.Tensor]
    gated: list[torch.Tensor]

    @property
    def final(self) -> torch.Tensor:
        return self.gated[-1]


class TaskAttentionStack(nn.Module):
    """The four attention modules of one task, chained across backbone stages."""

    def __init__(self, dims: int, channels: tuple[int, ...], task: str = "mer"):
        super().__init__()
        if len(channels) != 4:
            raise ValueError("expected four stage channel counts")
        self.task = task
        mods = [AttentionModule(dims, channels[0], channels[0])]
        for k in range(1, 4):
            mods.append(AttentionModule(dims, channels[k - 1] + channels[k], channels[k]))
        self.blocks = nn.ModuleList(mods)

    def forward(self, taps: FeatureTaps) -> AttentionState:
        m, f = attention_first(self.blocks[0], taps[1][1], taps[1][2])
        maps, gated = [m], [f]
        for k in range(2, 5):
            m, f = attention_step(self.blocks[k - 1], f, taps[k][1], taps[k][2])
            maps.append(m)
            gated.append(f)
        return AttentionState(self.task, maps, gated)
