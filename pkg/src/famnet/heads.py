"""Task heads and the MER, AU and uncertainty-weighted losses."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

BCE_EPS = 1e-7


@dataclass
class ScoreVector:
    mer: torch.Tensor  # (B, 3) logits
    au: torch.Tensor | None = None  # (B, N_AU) logits

    @property
    def mer_probs(self) -> torch.Tensor:
        return self.mer.softmax(dim=-1)

    @property
    def au_probs(self) -> torch.Tensor | None:
        return None if self.au is None else torch.sigmoid(self.au)


def global_pool(x: torch.Tensor) -> torch.Tensor:
    """Average over every non-channel axis: (B, C, ...) -> (B, C)."""
    if x.dim() < 3:
        raise ValueError(f"expected (B, C, ...) features, got shape {tuple(x.shape)}")
    return x.flatten(2).mean(dim=-1)


class TaskHeads(nn.Module):
    def __init__(self, in_features: int, n_classes: int = 3, n_au: int = 12):
        super().__init__()
        self.mer = nn.Linear(in_features, n_classes)
        self.au = nn.Linear(in_features, n_au)

    def forward(self, f4_mer: torch.Tensor, f4_au: torch.Tensor | None = None) -> ScoreVector:
        for f in (f4_mer, f4_au):
            if f is not None and f.shape[1] != self.mer.in_features:
                raise ValueError(f"head expects {self.mer.in_features} channels, got {f.shape[1]}")
        mer = self.mer(global_pool(f4_mer))
        au = None if f4_au is None else self.au(global_pool(f4_au))
        return ScoreVector(mer, au)


def loss_me(probs: torch.Tensor, target: torch.Tensor, check: bool = False) -> torch.Tensor:
    """Squared-margin MER loss, summed over classes and averaged over the batch.

    Per class: ``y * (1 - p)**2 + 0.5 * (1 - y) * p**2``.
    """
    if check:
        sums = probs.sum(dim=-1)
        if not torch.allclose(sums, torch.ones_like(sums), atol=1e-5):
            raise ValueError("MER predictions must be probabilities summing to 1")
    probs, target = torch.atleast_2d(probs), torch.atleast_2d(target).to(probs.dtype)
    per_class = target * (1 - probs) ** 2 + 0.5 * (1 - target) * probs ** 2
    return per_class.sum(dim=-1).mean()


def loss_au(probs: torch.Tensor, target: torch.Tensor, weights: torch.Tensor | None = None,
            eps: float = BCE_EPS) -> torch.Tensor:
    """Weighted binary cross-entropy, averaged over AUs then over the batch."""
    probs, target = torch.atleast_2d(probs), torch.atleast_2d(target).to(probs.dtype)
    p = probs.clamp(eps, 1 - eps)
    per_au = -(target * torch.log(p) + (1 - target) * torch.log1p(-p))
    if weights is not None:
        per_au = per_au * weights.to(per_au.dtype)
    return per_au.mean(dim=-1).mean()


def au_weights(targets: torch.Tensor, mode: str = "uniform") -> torch.Tensor:
    """Per-AU weights from the training fold's labels.

    ``uniform`` gives ones; ``inverse_freq`` weights each AU by the inverse of
    its positive rate (floored at one sample), rescaled to mean 1.
    """
    targets = torch.atleast_2d(targets).float()
    n_au = targets.shape[1]
    if mode == "uniform":
        return torch.ones(n_au)
    if mode == "inverse_freq":
        n = max(targets.shape[0], 1)
        rate = (targets.sum(dim=0) / n).clamp(min=1.0 / n)
        w = 1.0 / rate
        return w / w.mean()
    raise ValueError(f"unknown AU weight mode {mode!r}")


class UncertaintyLoss(nn.Module):
    """``L_me / sigma1**2 + L_au / sigma2**2 + log sigma1 + log sigma2``.

    Each sigma is stored as ``s = log sigma`` so it stays positive.
    """

    def __init__(self, s1: float = 0.0, s2: float = 0.0):
        super().__init__()
        self.s = nn.Parameter(torch.tensor([s1, s2], dtype=torch.float32))

    @property
    def sigmas(self) -> torch.Tensor:
        return self.s.detach().exp()

    def forward(self, l_me: torch.Tensor, l_au: torch.Tensor) -> torch.Tensor:
        return uncertainty_combine(l_me, l_au, self.s[0], self.s[1])


def uncertainty_combine(l_me, l_au, s1, s2):
    return torch.exp(-2 * s1) * l_me + torch.exp(-2 * s2) * l_au + s1 + s2
