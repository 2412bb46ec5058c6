"""Face cropping, resize/crop, augmentation and clip assembly.

Images are ``uint8`` arrays of shape ``(H, W, 3)`` until they are turned into
normalized float tensors by :func:`to_tensor` or :func:`assemble_clip`.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch
from PIL import Image

Box = tuple[int, int, int, int]  # x0, y0, x1, y1 (exclusive end)
Detector = Callable[[np.ndarray], Sequence[Box]]

OUTPUT_SIZE = 224
CANVAS_WIDTH, CANVAS_HEIGHT = 234, 240
NORM_MEAN = 0.5
NORM_STD = 0.5
FRAME_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


def read_image(path: str | Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
    except (OSError, ValueError) as exc:
        raise ValueError(f"cannot read image {path}: {exc}") from exc


def list_frames(clip_dir: str | Path) -> list[Path]:
    frames = sorted(p for p in Path(clip_dir).iterdir() if p.suffix.lower() in FRAME_SUFFIXES)
    if not frames:
        raise ValueError(f"no frame images in {clip_dir}")
    return frames


def _check_image(image) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or min(image.shape[:2]) < 1:
        raise ValueError(f"expected an (H, W, 3) image, got shape {image.shape}")
    return image


def null_detector(image: np.ndarray) -> list[Box]:
    """Reports the whole frame as the face; used for pre-cropped synthetic data."""
    h, w = image.shape[:2]
    return [(0, 0, w, h)]


def face_crop(image: np.ndarray, detector: Detector | None = None) -> tuple[np.ndarray, bool]:
    """Crop to the detected face box.

    Returns ``(crop, flagged)``. With no detection the centre square is
    returned and ``flagged`` is True.
    """
    image = _check_image(image)
    boxes = list((detector or null_detector)(image))
    if len(boxes) > 1:
        raise ValueError(f"detector returned {len(boxes)} faces, expected at most one")
    h, w = image.shape[:2]
    if not boxes:
        side = min(h, w)
        top, left = (h - side) // 2, (w - side) // 2
        return image[top:top + side, left:left + side], True
    x0, y0, x1, y1 = boxes[0]
    x0, y0 = max(0, x0), max(0, y0)
    x1, y1 = min(w, x1), min(h, y1)
    if x1 <= x0 or y1 <= y0:
        raise ValueError(f"degenerate face box {boxes[0]} for image of size {w}x{h}")
    return image[y0:y1, x0:x1], False


def canvas_shape(size: int = OUTPUT_SIZE) -> tuple[int, int]:
    """(height, width) of the pre-crop canvas, 240x234 scaled to ``size``."""
    return round(CANVAS_HEIGHT * size / OUTPUT_SIZE), round(CANVAS_WIDTH * size / OUTPUT_SIZE)


def resize(image: np.ndarray, height: int, width: int) -> np.ndarray:
    image = _check_image(image)
    if image.shape[:2] == (height, width):
        return image
    return np.asarray(Image.fromarray(image).resize((width, height), Image.BILINEAR))


def crop_offset(canvas: tuple[int, int], size: int, rng: np.random.Generator | None) -> tuple[int, int]:
    """Top-left corner of the crop window; random with ``rng``, centred without."""
    h, w = canvas
    if rng is None:
        return (h - size) // 2, (w - size) // 2
    return int(rng.integers(0, h - size + 1)), int(rng.integers(0, w - size + 1))


def resize_and_crop(
    image: np.ndarray,
    size: int = OUTPUT_SIZE,
    train: bool = False,
    rng: np.random.Generator | None = None,
    offset: tuple[int, int] | None = None,
) -> np.ndarray:
    """Resize to the canvas, then take a ``size`` x ``size`` crop.

    Eval mode crops centrally and passes already-sized inputs through
    untouched, so it is idempotent. Train mode crops at a random offset drawn
    from ``rng`` unless a fixed ``offset`` is given (shared across a clip).
    """
    image = _check_image(image)
    if not train and image.shape[:2] == (size, size):
        return image
    canvas = canvas_shape(size)
    image = resize(image, *canvas)
    if offset is None:
        if train and rng is None:
            raise ValueError("train-mode cropping needs an rng or a fixed offset")
        offset = crop_offset(canvas, size, rng if train else None)
    top, left = offset
    return image[top:top + size, left:left + size]


@dataclass(frozen=True)
class AugmentPolicy:
    rotation: float = 10.0  # max absolute degrees
    flip_prob: float = 0.5
    brightness: tuple[float, float] = (0.8, 1.2)
    enabled: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError("flip_prob must lie in [0, 1]")
        if self.rotation < 0:
            raise ValueError("rotation must be non-negative")
        lo, hi = self.brightness
        if not 0 < lo <= hi:
            raise ValueError("brightness range must satisfy 0 < low <= high")

    def rng(self, *key: int) -> np.random.Generator:
        """Generator for one sample, derived from the policy seed and ``key``."""
        return np.random.default_rng([self.seed, *key])


@dataclass(frozen=True)
class AugmentParams:
    angle: float = 0.0
    flip: bool = False
    brightness: float = 1.0


def sample_augmentation(policy: AugmentPolicy, rng: np.random.Generator) -> AugmentParams:
    if not policy.enabled:
        return AugmentParams()
    angle = float(rng.uniform(-policy.rotation, policy.rotation)) if policy.rotation else 0.0
    flip = bool(rng.random() < policy.flip_prob)
    brightness = float(rng.uniform(*policy.brightness))
    return AugmentParams(angle, flip, brightness)


def apply_augmentation(image: np.ndarray, params: AugmentParams) -> np.ndarray:
    image = _check_image(image)
    if params.angle:
        image = np.asarray(Image.fromarray(image).rotate(params.angle, resample=Image.BILINEAR))
    if params.flip:
        image = image[:, ::-1]
    if params.brightness != 1.0:
        image = np.clip(image.astype(np.float32) * params.brightness, 0, 255).round().astype(np.uint8)
    return np.ascontiguousarray(image)


def augment(image: np.ndarray, policy: AugmentPolicy, rng: np.random.Generator) -> np.ndarray:
    return apply_augmentation(image, sample_augmentation(policy, rng))


def to_tensor(image: np.ndarray) -> torch.Tensor:
    """uint8 (H, W, 3) -> float (3, H, W) normalized to [-1, 1]."""
    image = _check_image(image)
    x = torch.from_numpy(np.ascontiguousarray(image)).permute(2, 0, 1).float() / 255.0
    return (x - NORM_MEAN) / NORM_STD


def temporal_indices(n_frames: int, depth: int) -> list[int]:
    """Frame indices for a clip of ``depth``: uniform stride when long, last-frame padding when short."""
    if n_frames < 1:
        raise ValueError("clip has no frames")
    if n_frames >= depth:
        # round-half-up of i*(n-1)/(d-1) in integer arithmetic; linspace drifts at exact halves
        span, steps = n_frames - 1, depth - 1
        return [(2 * i * span + steps) // (2 * steps) for i in range(depth)]
    return list(range(n_frames)) + [n_frames - 1] * (depth - n_frames)


def assemble_clip(frames: Sequence[np.ndarray], depth: int = 16) -> torch.Tensor:
    """Stack frames into a normalized (3, H, W, D) tensor."""
    if len(frames) == 0:
        raise ValueError("cannot assemble a clip from an empty frame list")
    if depth < 8:
        raise ValueError(f"clip depth must be >= 8, got {depth}")
    chosen = [frames[i] for i in temporal_indices(len(frames), depth)]
    shapes = {np.asarray(f).shape for f in chosen}
    if len(shapes) != 1:
        raise ValueError(f"frames differ in shape: {sorted(shapes)}")
    return torch.stack([to_tensor(f) for f in chosen], dim=-1)
