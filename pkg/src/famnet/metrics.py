"""Late fusion of branch scores, UAR/UF1 and report output."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .data import CLASS_NAMES


def late_fuse(o1, o2):
    """Element-wise mean of two branches' MER scores (pre-softmax)."""
    if tuple(o1.shape) != tuple(o2.shape):
        raise ValueError(f"score shapes differ: {tuple(o1.shape)} vs {tuple(o2.shape)}")
    return (o1 + o2) / 2


def fused_prediction(o1: torch.Tensor, o2: torch.Tensor) -> torch.Tensor:
    """Class of the fused scores. Softmax is monotone, so the argmax is taken on
    the scores directly; after softmax, nearly equal scores can round to ties."""
    return late_fuse(o1, o2).argmax(dim=-1)


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int], n_classes: int = 3) -> np.ndarray:
    """Rows are true classes, columns predictions."""
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred lengths differ")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def _counts(confusion):
    cm = np.asarray(confusion, dtype=np.int64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError(f"confusion matrix must be square, got shape {cm.shape}")
    tp = np.diag(cm)
    return cm, tp, cm.sum(axis=0) - tp, cm.sum(axis=1) - tp, cm.sum(axis=1)


def compute_uar(confusion) -> float:
    """Mean per-class recall. Classes with no ground-truth samples are skipped."""
    _, tp, _, _, n = _counts(confusion)
    present = n > 0
    if not present.all():
        warnings.warn(f"classes {np.flatnonzero(~present).tolist()} absent from ground truth; "
                      "excluded from UAR", stacklevel=2)
    if not present.any():
        raise ValueError("confusion matrix is empty")
    return float(np.mean(tp[present] / n[present]))


def compute_uf1(confusion, exclude_absent: bool = False) -> float:
    """Mean per-class F1 = 2TP / (2TP + FP + FN).

    A class with TP = FP = FN = 0 scores 0 (with a warning). With
    ``exclude_absent`` classes lacking ground-truth samples are left out of
    the mean instead, which is how single-subject folds are scored.
    """
    _, tp, fp, fn, n = _counts(confusion)
    keep = n > 0 if exclude_absent else np.ones_like(n, dtype=bool)
    if not keep.any():
        raise ValueError("confusion matrix is empty")
    denom = 2 * tp + fp + fn
    empty = (denom == 0) & keep
    if empty.any():
        warnings.warn(f"classes {np.flatnonzero(empty).tolist()} have TP=FP=FN=0; F1 set to 0",
                      stacklevel=2)
    f1 = np.divide(2 * tp, denom, out=np.zeros(len(tp), dtype=float), where=denom > 0)
    return float(np.mean(f1[keep]))


@dataclass
class MetricsReport:
    confusion: np.ndarray
    class_names: tuple[str, ...] = CLASS_NAMES
    per_fold: list[dict] = field(default_factory=list)

    def __post_init__(self):
        self.confusion = np.asarray(self.confusion, dtype=np.int64)
        if self.confusion.shape != (len(self.class_names),) * 2:
            raise ValueError("confusion shape does not match the class names")

    @property
    def n_samples(self) -> int:
        return int(self.confusion.sum())

    @property
    def tp(self) -> np.ndarray:
        return np.diag(self.confusion)

    @property
    def fp(self) -> np.ndarray:
        return self.confusion.sum(axis=0) - self.tp

    @property
    def fn(self) -> np.ndarray:
        return self.confusion.sum(axis=1) - self.tp

    @property
    def support(self) -> np.ndarray:
        return self.confusion.sum(axis=1)

    @property
    def uar(self) -> float:
        return compute_uar(self.confusion)

    @property
    def uf1(self) -> float:
        return compute_uf1(self.confusion)

    def fold_means(self) -> dict[str, float]:
        if not self.per_fold:
            return {}
        return {k: float(np.mean([f[k] for f in self.per_fold])) for k in ("uar", "uf1")}

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "class_names": list(self.class_names),
            "confusion": self.confusion.tolist(),
            "tp": self.tp.tolist(),
            "fp": self.fp.tolist(),
            "fn": self.fn.tolist(),
            "support": self.support.tolist(),
            "uar": round(self.uar, 6),
            "uf1": round(self.uf1, 6),
            "per_fold": self.per_fold,
            "per_fold_mean": self.fold_means(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(np.asarray(d["confusion"]), tuple(d["class_names"]), list(d.get("per_fold", [])))


def plot_confusion(confusion: np.ndarray, class_names: Sequence[str], path: Path, title: str = ""):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cm = np.asarray(confusion)
    rows = cm.sum(axis=1, keepdims=True)
    frac = np.divide(cm, rows, out=np.zeros(cm.shape, dtype=float), where=rows > 0)
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.imshow(frac, cmap="Blues", vmin=0, vmax=1)
    ax.set_xticks(range(len(class_names)), class_names)
    ax.set_yticks(range(len(class_names)), class_names)
    ax.set_xlabel("Predicted label")
    ax.set_ylabel("True label")
    for i in range(cm.shape[0]):
        for j in range(cm.shape[1]):
            ax.text(j, i, f"{frac[i, j]:.2f}\n({cm[i, j]})", ha="center", va="center",
                    color="white" if frac[i, j] > 0.5 else "black", fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def emit_report(report: MetricsReport, out_dir: str | Path, dataset: str = "",
                config_hash: str = "", name: str = "metrics") -> dict[str, Path]:
    """Write ``<name>.json``, ``<name>_confusion.csv`` and ``<name>_confusion.png``."""
    if report.n_samples == 0:
        raise ValueError("refusing to emit an empty report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"dataset": dataset, "config_hash": config_hash, **report.to_dict()}
    paths = {
        "metrics": out_dir / f"{name}.json",
        "csv": out_dir / f"{name}_confusion.csv",
        "heatmap": out_dir / f"{name}_confusion.png",
    }
    paths["metrics"].write_text(json.dumps(payload, indent=2) + "\n")
    header = "true\\pred," + ",".join(report.class_names)
    rows = [f"{n}," + ",".join(str(v) for v in row) for n, row in zip(report.class_names, report.confusion)]
    paths["csv"].write_text("\n".join([header, *rows]) + "\n")
    plot_confusion(report.confusion, report.class_names, paths["heatmap"], title=dataset)
    return paths
