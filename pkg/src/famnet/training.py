"""LOSO training and evaluation of AMNet branches, fusion and the ablation grid."""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import torch
from torch import nn

from .data import Emotion, Fold, Manifest, encode_aus, expand_apex_neighbors, loso_folds
from .heads import UncertaintyLoss, au_weights, loss_au, loss_me
from .metrics import MetricsReport, compute_uar, compute_uf1, confusion_matrix, emit_report, late_fuse
from .model import AMNet
from .preprocess import (AugmentPolicy, Detector, apply_augmentation, canvas_shape, crop_offset,
                         face_crop, list_frames, read_image, resize, sample_augmentation,
                         temporal_indices, to_tensor)

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "famnet-checkpoint"
CHECKPOINT_VERSION = 1
BRANCHES = ("2d", "3d", "fused")
TASK_MODES = ("single", "dual")
NEIGHBOR_MODES = ("all", "random", "apex")


@dataclass(frozen=True)
class TrainConfig:
    branch: str = "2d"
    task_mode: str = "dual"
    attention: bool = True
    lr: float = 1e-4
    decay: float = 0.92
    epochs: int = 100
    batch_size: int | None = None
    seed: int = 0
    width: float = 1.0
    image_size: int = 224
    depth: int = 16
    au_weighting: str = "uniform"
    augment: bool = True
    # "all": every frame of the 7-frame apex window is a training sample;
    # "random": one window frame per sample per epoch; "apex": apex only.
    neighbors: str = "all"
    grad_clip: float = 5.0
    eval_batch_size: int = 32

    def __post_init__(self):
        if self.branch not in BRANCHES:
            raise ValueError(f"branch must be one of {BRANCHES}, got {self.branch!r}")
        if self.task_mode not in TASK_MODES:
            raise ValueError(f"task_mode must be one of {TASK_MODES}, got {self.task_mode!r}")
        if self.neighbors not in NEIGHBOR_MODES:
            raise ValueError(f"neighbors must be one of {NEIGHBOR_MODES}, got {self.neighbors!r}")
        if self.epochs < 0 or self.lr <= 0 or not 0 < self.decay <= 1:
            raise ValueError("need epochs >= 0, lr > 0 and 0 < decay <= 1")
        if self.depth < 8:
            raise ValueError(f"depth must be >= 8, got {self.depth}")
        if not self.attention and self.task_mode != "single":
            raise ValueError("the no-attention baseline is single-task")

    @property
    def dims(self) -> int:
        if self.branch == "fused":
            raise ValueError("the fused branch has no single dimensionality")
        return 2 if self.branch == "2d" else 3

    @property
    def dual(self) -> bool:
        return self.task_mode == "dual"

    @property
    def effective_batch_size(self) -> int:
        if self.batch_size:
            return self.batch_size
        return 16 if self.branch == "2d" else 4

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown TrainConfig fields: {sorted(unknown)}")
        return cls(**d)

    def hash(self) -> str:
        return config_hash(self.to_dict())


def config_hash(d: Mapping) -> str:
    return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()[:12]


def lr_at(lr0: float, gamma: float, epoch: int) -> float:
    """Learning rate in effect during ``epoch`` (0-based) under exponential decay."""
    return lr0 * gamma ** epoch


def select_final_index(values: Sequence[float]) -> int:
    """Index of the value kept by the discard-the-best rule.

    The first occurrence of the maximum is discarded; the first maximum of
    what remains is returned.
    """
    if len(values) < 2:
        raise ValueError(f"need at least 2 values, got {len(values)}")
    best = int(np.argmax(values))
    rest = [i for i in range(len(values)) if i != best]
    return rest[int(np.argmax([values[i] for i in rest]))]


def select_final(values: Sequence[float]) -> float:
    return float(values[select_final_index(values)])


class TrainingDiverged(RuntimeError):
    pass


# --------------------------------------------------------------------- data


@dataclass
class EntryFrames:
    subject: str
    emotion: Emotion
    aus: np.ndarray
    frames: dict[int, np.ndarray]  # frame index -> canvas-sized uint8 image
    apex: int
    window: list[int]
    clip: list[int]
    flagged: bool


class FrameCache:
    """Face-cropped, canvas-resized frames for every usable manifest entry.

    Only the frames a branch can ask for are kept: the apex window for 2D and
    the temporally sampled indices for 3D.
    """

    def __init__(self, manifest: Manifest, image_size: int, depth: int,
                 detector: Detector | None = None, branches: Sequence[str] = ("2d", "3d")):
        self.manifest = manifest.labelled()
        self.image_size = image_size
        self.depth = depth
        self.canvas = canvas_shape(image_size)
        self.entries: list[EntryFrames] = []
        for entry in self.manifest.entries:
            paths = list_frames(entry.clip_dir)
            n = len(paths)
            window = expand_apex_neighbors(entry.apex_index, n) if "2d" in branches else []
            clip = temporal_indices(n, depth) if "3d" in branches else []
            frames, flagged = {}, False
            for i in sorted(set(window) | set(clip) | {entry.apex_index}):
                face, flag = face_crop(read_image(paths[i]), detector)
                flagged |= flag
                frames[i] = resize(face, *self.canvas)
            self.entries.append(EntryFrames(
                entry.subject, self.manifest.emotion(entry),
                encode_aus(entry.aus, self.manifest.au_vocabulary),
                frames, entry.apex_index, window, clip, flagged,
            ))

    @property
    def n_au(self) -> int:
        return len(self.manifest.au_vocabulary)

    def indices(self, subjects) -> list[int]:
        wanted = set(subjects)
        return [i for i, e in enumerate(self.entries) if e.subject in wanted]


def _view(images: list[np.ndarray], size: int, canvas, rng: np.random.Generator | None,
          policy: AugmentPolicy | None) -> list[torch.Tensor]:
    params = sample_augmentation(policy, rng) if (policy is not None and rng is not None) else None
    top, left = crop_offset(canvas, size, rng)
    out = []
    for img in images:
        if params is not None:
            img = apply_augmentation(img, params)
        out.append(to_tensor(img[top:top + size, left:left + size]))
    return out


def build_batch(cache: FrameCache, items: Sequence[tuple[int, int | None]], dims: int,
                train: bool = False, policy: AugmentPolicy | None = None, epoch: int = 0):
    """Inputs, MER targets and AU targets for ``(entry index, frame index)`` items.

    2D items select one frame (``None`` means the apex); 3D items use the
    whole sampled clip and share one augmentation draw across its frames.
    """
    xs, ys, aus = [], [], []
    for entry_idx, frame_idx in items:
        e = cache.entries[entry_idx]
        rng = policy.rng(epoch, entry_idx, 0 if frame_idx is None else frame_idx + 1) if train and policy else None
        if train and rng is None:
            rng = np.random.default_rng([epoch, entry_idx])
        if dims == 2:
            img = e.frames[e.apex if frame_idx is None else frame_idx]
            xs.append(_view([img], cache.image_size, cache.canvas, rng, policy if train else None)[0])
        else:
            frames = [e.frames[i] for i in e.clip]
            xs.append(torch.stack(_view(frames, cache.image_size, cache.canvas, rng,
                                        policy if train else None), dim=-1))
        ys.append(int(e.emotion))
        aus.append(e.aus)
    return torch.stack(xs), torch.tensor(ys), torch.from_numpy(np.stack(aus))


def training_items(cache: FrameCache, indices: Sequence[int], config: TrainConfig,
                   rng: np.random.Generator) -> list[tuple[int, int | None]]:
    if config.dims == 3 or config.neighbors == "apex":
        return [(i, None) for i in indices]
    if config.neighbors == "all":
        return [(i, f) for i in indices for f in cache.entries[i].window]
    return [(i, int(rng.choice(cache.entries[i].window))) for i in indices]


def _batches(items: list, batch_size: int) -> list[list]:
    chunks = [items[i:i + batch_size] for i in range(0, len(items), batch_size)]
    # a lone trailing sample would break batch-norm statistics
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2].extend(chunks.pop())
    return chunks


# --------------------------------------------------------------- checkpoints


def make_checkpoint(model: AMNet, uncertainty: UncertaintyLoss, config: TrainConfig,
                    au_vocabulary: Sequence[str], fold: str, epoch: int) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "n_au": model.n_au,
        "au_vocabulary": list(au_vocabulary),
        "fold": fold,
        "epoch": epoch,
        "model": copy.deepcopy(model.state_dict()),
        "uncertainty": copy.deepcopy(uncertainty.state_dict()),
    }


def save_checkpoint(ckpt: dict, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(ckpt, path)
    return path


def load_checkpoint(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint {path} not found")
    ckpt = torch.load(path, map_location="cpu", weights_only=False)
    if ckpt.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a {CHECKPOINT_FORMAT} file")
    if ckpt.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {ckpt.get('version')} in {path}")
    return ckpt


def model_from_checkpoint(ckpt: dict) -> tuple[AMNet, TrainConfig]:
    config = TrainConfig.from_dict(ckpt["config"])
    model = AMNet(config.dims, config.width, ckpt["n_au"], attention=config.attention)
    model.load_state_dict(ckpt["model"])
    model.eval()
    return model, config


# ------------------------------------------------------------------ training


@dataclass
class FoldResult:
    fold: str
    trace: list[dict]
    selected_epoch: int
    confusion: np.ndarray
    scores: np.ndarray  # test-subject MER logits at the selected epoch
    labels: np.ndarray
    checkpoint: dict = field(repr=False)

    @property
    def uar(self) -> float:
        return compute_uar(self.confusion)

    @property
    def uf1(self) -> float:
        return compute_uf1(self.confusion, exclude_absent=True)

    def summary(self) -> dict:
        return {"fold": self.fold, "epoch": self.selected_epoch, "n": int(self.confusion.sum()),
                "uar": round(self.uar, 6), "uf1": round(self.uf1, 6)}


@torch.no_grad()
def predict(model: AMNet, cache: FrameCache, indices: Sequence[int], batch_size: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """MER logits and true labels for apex frames (2D) or clips (3D)."""
    model.eval()
    logits, labels = [], []
    items = [(i, None) for i in indices]
    for chunk in [items[i:i + batch_size] for i in range(0, len(items), batch_size)]:
        x, y, _ = build_batch(cache, chunk, model.dims)
        logits.append(model(x, with_au=False).mer)
        labels.append(y)
    if not logits:
        return np.zeros((0, 3), dtype=np.float32), np.zeros(0, dtype=int)
    return torch.cat(logits).numpy(), torch.cat(labels).numpy()


def fold_seed(seed: int, fold_index: int) -> int:
    return int(np.random.SeedSequence([seed, fold_index]).generate_state(1)[0])


def train_branch(config: TrainConfig, fold: Fold, cache: FrameCache, fold_index: int = 0) -> FoldResult:
    """Train one branch on ``fold.train`` and score ``fold.test`` after every epoch.

    The returned checkpoint and confusion matrix belong to the epoch chosen by
    :func:`select_final_index` on the per-epoch test UAR trace (the last epoch
    when fewer than two epochs ran).
    """
    seed = fold_seed(config.seed, fold_index)
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    model = AMNet(config.dims, config.width, cache.n_au, attention=config.attention)
    uncertainty = UncertaintyLoss()
    if config.dual:
        params = list(model.parameters()) + list(uncertainty.parameters())
    else:
        frozen = {id(p) for p in model.au_parameters()}
        for p in model.au_parameters():
            p.requires_grad_(False)
        uncertainty.requires_grad_(False)
        params = [p for p in model.parameters() if id(p) not in frozen]
    optimizer = torch.optim.Adam(params, lr=config.lr, betas=(0.9, 0.999), eps=1e-8)
    scheduler = torch.optim.lr_scheduler.ExponentialLR(optimizer, gamma=config.decay)
    policy = AugmentPolicy(seed=seed) if config.augment else AugmentPolicy(enabled=False, seed=seed)

    train_idx = cache.indices(fold.train)
    test_idx = cache.indices(fold.test)
    if not train_idx or not test_idx:
        raise ValueError(f"fold {fold.test_subject} has an empty train or test split")
    all_aus = torch.from_numpy(np.stack([cache.entries[i].aus for i in train_idx]))
    weights = au_weights(all_aus, config.au_weighting)
    vocab = cache.manifest.au_vocabulary

    trace: list[dict] = []
    kept: list[tuple[float, int, dict, np.ndarray, np.ndarray]] = []
    initial = make_checkpoint(model, uncertainty, config, vocab, fold.test_subject, -1)
    for epoch in range(config.epochs):
        model.train()
        lr = optimizer.param_groups[0]["lr"]
        items = training_items(cache, train_idx, config, rng)
        order = rng.permutation(len(items))
        sums = {"loss": 0.0, "loss_me": 0.0, "loss_au": 0.0}
        n_seen = 0
        for chunk in _batches([items[i] for i in order], config.effective_batch_size):
            x, y, y_au = build_batch(cache, chunk, config.dims, train=True, policy=policy, epoch=epoch)
            out = model(x, with_au=config.dual)
            l_me = loss_me(out.mer_probs, nn.functional.one_hot(y, 3).float())
            if config.dual:
                l_au = loss_au(out.au_probs, y_au, weights)
                loss = uncertainty(l_me, l_au)
            else:
                l_au = torch.zeros(())
                loss = l_me
            if not torch.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss in fold {fold.test_subject} epoch {epoch}: "
                    f"L_ME={l_me.item()} L_AU={l_au.item()} s={uncertainty.s.tolist()}")
            optimizer.zero_grad()
            loss.backward()
            if config.grad_clip:
                nn.utils.clip_grad_norm_(params, config.grad_clip)
            optimizer.step()
            for key, val in (("loss", loss), ("loss_me", l_me), ("loss_au", l_au)):
                sums[key] += val.item() * len(chunk)
            n_seen += len(chunk)
        scheduler.step()

        scores, labels = predict(model, cache, test_idx, config.eval_batch_size)
        cm = confusion_matrix(labels, scores.argmax(axis=1))
        sigma = uncertainty.sigmas.tolist()
        row = {"epoch": epoch, "lr": lr, **{k: v / max(n_seen, 1) for k, v in sums.items()},
               "sigma1": sigma[0], "sigma2": sigma[1],
               "uar": compute_uar(cm), "uf1": compute_uf1(cm, exclude_absent=True)}
        trace.append(row)
        log.info("fold=%s epoch=%d lr=%.3e L_ME=%.4f L_AU=%.4f sigma1=%.4f sigma2=%.4f "
                 "test_UAR=%.4f test_UF1=%.4f", fold.test_subject, epoch, lr, row["loss_me"],
                 row["loss_au"], sigma[0], sigma[1], row["uar"], row["uf1"])
        # keep the two best epochs (value desc, epoch asc): all select_final can pick
        kept.append((row["uar"], epoch, make_checkpoint(model, uncertainty, config, vocab,
                                                        fold.test_subject, epoch), scores, cm))
        kept.sort(key=lambda k: (-k[0], k[1]))
        if config.epochs >= 2:
            del kept[2:]
        else:
            kept = kept[-1:]

    if not trace:
        scores, labels = predict(model, cache, test_idx, config.eval_batch_size)
        cm = confusion_matrix(labels, scores.argmax(axis=1))
        return FoldResult(fold.test_subject, [], -1, cm, scores, labels, initial)
    if len(trace) >= 2:
        chosen = select_final_index([r["uar"] for r in trace])
    else:
        chosen = trace[-1]["epoch"]
    _, epoch, ckpt, scores, cm = next(k for k in kept if k[1] == chosen)
    labels = np.asarray([int(cache.entries[i].emotion) for i in test_idx])
    return FoldResult(fold.test_subject, trace, epoch, cm, scores, labels, ckpt)


def evaluate_checkpoint(ckpt: dict, cache: FrameCache) -> FoldResult:
    """Re-score a fold checkpoint on its test subject."""
    model, config = model_from_checkpoint(ckpt)
    idx = cache.indices([ckpt["fold"]])
    scores, labels = predict(model, cache, idx, config.eval_batch_size)
    cm = confusion_matrix(labels, scores.argmax(axis=1))
    return FoldResult(ckpt["fold"], [], ckpt["epoch"], cm, scores, labels, ckpt)


# ---------------------------------------------------------------------- LOSO


@dataclass
class LosoResult:
    config: TrainConfig
    report: MetricsReport
    folds: list[FoldResult]

    @property
    def uar(self) -> float:
        return self.report.uar

    @property
    def uf1(self) -> float:
        return self.report.uf1

    def checkpoints(self) -> dict[str, dict]:
        return {f.fold: f.checkpoint for f in self.folds}

    def save(self, out_dir: str | Path, dataset: str = "") -> dict[str, Path]:
        out_dir = Path(out_dir)
        for f in self.folds:
            save_checkpoint(f.checkpoint, checkpoint_path(out_dir / "checkpoints", f.fold))
        traces = {f.fold: {"selected_epoch": f.selected_epoch, "trace": f.trace} for f in self.folds}
        (out_dir / "traces.json").write_text(json.dumps(traces, indent=2) + "\n")
        return emit_report(self.report, out_dir, dataset=dataset, config_hash=self.config.hash())


def checkpoint_path(ckpt_dir: str | Path, subject: str) -> Path:
    return Path(ckpt_dir) / f"fold_{subject}.pt"


def _pool(config: TrainConfig, folds: list[FoldResult]) -> LosoResult:
    confusion = sum((f.confusion for f in folds), np.zeros((3, 3), dtype=np.int64))
    return LosoResult(config, MetricsReport(confusion, per_fold=[f.summary() for f in folds]), folds)


def _train_fold_worker(args):
    config, fold, cache, index = args
    torch.set_num_threads(1)
    return train_branch(config, fold, cache, index)


def run_loso(config: TrainConfig, manifest: Manifest, cache: FrameCache | None = None,
             checkpoints: Mapping[str, Mapping[str, dict] | str | Path] | None = None,
             parallel: int = 1, detector: Detector | None = None) -> LosoResult:
    """Leave-one-subject-out training (2D/3D) or late-fusion evaluation (fused).

    For ``branch == "fused"`` pass ``checkpoints={"2d": ..., "3d": ...}`` where
    each value maps subject -> checkpoint dict or is a directory of
    ``fold_<subject>.pt`` files.
    """
    manifest = manifest.labelled()
    folds = loso_folds(manifest)
    if config.branch == "fused":
        return _run_fused(config, manifest, folds, checkpoints, cache, detector)
    cache = cache or FrameCache(manifest, config.image_size, config.depth, detector, (config.branch,))
    jobs = [(config, fold, cache, i) for i, fold in enumerate(folds)]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_train_fold_worker, jobs))
    else:
        results = [train_branch(*job) for job in jobs]
    return _pool(config, results)


def _fold_checkpoints(source, branch: str, subjects: Sequence[str]) -> dict[str, dict]:
    if source is None:
        raise FileNotFoundError(f"fused evaluation needs {branch} branch checkpoints; none given")
    if isinstance(source, (str, Path)):
        return {s: load_checkpoint(checkpoint_path(source, s)) for s in subjects}
    missing = [s for s in subjects if s not in source]
    if missing:
        raise FileNotFoundError(f"missing {branch} checkpoints for folds {missing}")
    return {s: source[s] for s in subjects}


def _run_fused(config, manifest, folds, checkpoints, cache, detector) -> LosoResult:
    checkpoints = checkpoints or {}
    subjects = [f.test_subject for f in folds]
    ckpts = {b: _fold_checkpoints(checkpoints.get(b), b, subjects) for b in ("2d", "3d")}
    for branch, per_fold in ckpts.items():
        for subject, ck in per_fold.items():
            if ck["config"]["branch"] != branch:
                raise ValueError(f"checkpoint for fold {subject} is a {ck['config']['branch']} model, "
                                 f"expected {branch}")
    first = {b: TrainConfig.from_dict(ckpts[b][subjects[0]]["config"]) for b in ckpts}
    if cache is None or cache.image_size != first["2d"].image_size or cache.depth != first["3d"].depth:
        cache = FrameCache(manifest, first["2d"].image_size, first["3d"].depth, detector)
    results = []
    for fold in folds:
        s = fold.test_subject
        r2 = evaluate_checkpoint(ckpts["2d"][s], cache)
        r3 = evaluate_checkpoint(ckpts["3d"][s], cache)
        fused = late_fuse(torch.from_numpy(r2.scores), torch.from_numpy(r3.scores)).numpy()
        cm = confusion_matrix(r2.labels, fused.argmax(axis=1))
        ck = {"format": CHECKPOINT_FORMAT, "fold": s, "members": {"2d": ckpts["2d"][s], "3d": ckpts["3d"][s]}}
        results.append(FoldResult(s, [], -1, cm, fused, r2.labels, ck))
    return _pool(config, results)


# ------------------------------------------------------------------ ablation

ABLATION_ROWS = ("Baseline", "Single+HA(2D)", "Dual+HA(2D)", "Single+HA(3D)", "Dual+HA(3D)", "FAMNet")


def ablation_configs(base: TrainConfig, batch_size_3d: int | None = None) -> dict[str, TrainConfig]:
    b3 = batch_size_3d if batch_size_3d is not None else base.batch_size
    return {
        "Baseline": replace(base, branch="2d", task_mode="single", attention=False),
        "Single+HA(2D)": replace(base, branch="2d", task_mode="single", attention=True),
        "Dual+HA(2D)": replace(base, branch="2d", task_mode="dual", attention=True),
        "Single+HA(3D)": replace(base, branch="3d", task_mode="single", attention=True, batch_size=b3),
        "Dual+HA(3D)": replace(base, branch="3d", task_mode="dual", attention=True, batch_size=b3),
        "FAMNet": replace(base, branch="fused", task_mode="dual", attention=True),
    }


@dataclass
class AblationResult:
    results: dict[str, LosoResult]

    def rows(self) -> list[dict]:
        return [{"method": name, "uar": r.uar, "uf1": r.uf1} for name, r in self.results.items()]

    def table(self) -> str:
        lines = ["| Methods | UAR | UF1 |", "|---|---|---|"]
        lines += [f"| {r['method']} | {r['uar']:.4f} | {r['uf1']:.4f} |" for r in self.rows()]
        return "\n".join(lines)

    def save(self, out_dir: str | Path, dataset: str = "") -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, result in self.results.items():
            slug = name.lower().replace("+", "_").replace("(", "_").replace(")", "")
            if result.config.branch == "fused":
                emit_report(result.report, out_dir / slug, dataset, result.config.hash())
            else:
                result.save(out_dir / slug, dataset)
        (out_dir / "ablation.json").write_text(json.dumps(self.rows(), indent=2) + "\n")
        path = out_dir / "ablation.md"
        path.write_text(self.table() + "\n")
        return path


def run_ablation(manifest: Manifest, base: TrainConfig, batch_size_3d: int | None = None,
                 parallel: int = 1, detector: Detector | None = None) -> AblationResult:
    """All six ablation rows; FAMNet fuses the two Dual+HA rows' fold checkpoints."""
    configs = ablation_configs(base, batch_size_3d)
    cache = FrameCache(manifest, base.image_size, base.depth, detector)
    results: dict[str, LosoResult] = {}
    for name in ABLATION_ROWS[:-1]:
        log.info("ablation: %s", name)
        results[name] = run_loso(configs[name], manifest, cache=cache, parallel=parallel)
    results["FAMNet"] = run_loso(configs["FAMNet"], manifest, cache=cache, checkpoints={
        "2d": results["Dual+HA(2D)"].checkpoints(), "3d": results["Dual+HA(3D)"].checkpoints()})
    return AblationResult(results)


def run_eval(branch: str, manifest: Manifest, checkpoints: Mapping[str, Mapping[str, dict] | str | Path],
             detector: Detector | None = None) -> LosoResult:
    """Score saved fold checkpoints on their held-out subjects without training."""
    if branch == "fused":
        return run_loso(TrainConfig(branch="fused"), manifest, checkpoints=checkpoints, detector=detector)
    manifest = manifest.labelled()
    subjects = [f.test_subject for f in loso_folds(manifest)]
    ckpts = _fold_checkpoints(checkpoints.get(branch), branch, subjects)
    config = TrainConfig.from_dict(ckpts[subjects[0]]["config"])
    if config.branch != branch:
        raise ValueError(f"checkpoints hold a {config.branch} model, expected {branch}")
    cache = FrameCache(manifest, config.image_size, config.depth, detector, (branch,))
    return _pool(config, [evaluate_checkpoint(ckpts[s], cache) for s in subjects])
