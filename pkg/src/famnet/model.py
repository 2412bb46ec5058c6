"""AMNet branches: a shared ResNet18 trunk with per-task attention stacks and heads."""

from __future__ import annotations

import torch
from torch import nn

from .attention import TaskAttentionStack
from .backbone import ResNet18Trunk
from .heads import ScoreVector, TaskHeads, global_pool

TASKS = ("mer", "au")


def clip_to_native(clip: torch.Tensor) -> torch.Tensor:
    """(B, C, H, W, D) clip batch -> (B, C, D, H, W) for 3D convolutions."""
    if clip.dim() != 5:
        raise ValueError(f"expected a (B, C, H, W, D) clip batch, got shape {tuple(clip.shape)}")
    return clip.permute(0, 1, 4, 2, 3)


class AMNet(nn.Module):
    """One branch (2D apex-frame or 3D clip) with hard-shared backbone.

    With ``attention=False`` this is the plain-backbone baseline: both heads
    read the pooled final block output and no attention parameters exist.
    3D inputs use the ``(B, C, H, W, D)`` clip layout.
    """

    def __init__(self, dims: int = 2, width: float = 1.0, n_au: int = 12, n_classes: int = 3,
                 attention: bool = True):
        super().__init__()
        self.dims = dims
        self.n_au = n_au
        self.backbone = ResNet18Trunk(dims=dims, width=width)
        ch = self.backbone.channels
        self.attention = attention
        if attention:
            self.stacks = nn.ModuleDict({t: TaskAttentionStack(dims, ch, t) for t in TASKS})
        self.heads = TaskHeads(ch[-1], n_classes, n_au)

    def features(self, x: torch.Tensor):
        if self.dims == 3:
            x = clip_to_native(x)
        return self.backbone(x)

    def forward(self, x: torch.Tensor, with_au: bool = True) -> ScoreVector:
        taps = self.features(x)
        if not self.attention:
            pooled = global_pool(taps[4][2])
            mer = self.heads.mer(pooled)
            return ScoreVector(mer, self.heads.au(pooled) if with_au else None)
        f_mer = self.stacks["mer"](taps).final
        f_au = self.stacks["au"](taps).final if with_au else None
        return self.heads(f_mer, f_au)

    def au_parameters(self) -> list[nn.Parameter]:
        """Parameters used only by the AU task."""
        params = list(self.heads.au.parameters())
        if self.attention:
            params += list(self.stacks["au"].parameters())
        return params
