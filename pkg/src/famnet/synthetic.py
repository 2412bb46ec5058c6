"""Procedural micro-expression clips with a known emotion -> AU structure.

Each clip shows a schematic face (oval, eyes, brows, mouth). The emotion's
action units appear as coloured Gaussian blobs whose strength ramps up to the
apex frame in the middle of the clip and back down. Subjects differ by face
position, size and skin tone.

Optional decoys make the two input views disagree on purpose: a static decoy
copies another emotion's pattern onto every frame (so the apex frame alone is
ambiguous) and a transient decoy flashes one briefly away from the apex (so
the whole clip is ambiguous while the apex frame stays clean).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from PIL import Image

from .data import Emotion, Manifest, ManifestEntry

DEFAULT_AUS = ("AU1", "AU2", "AU4", "AU5", "AU6", "AU7", "AU9", "AU10", "AU12", "AU14", "AU15", "AU17")

DEFAULT_BLUEPRINT: dict[Emotion, tuple[str, ...]] = {
    Emotion.POSITIVE: ("AU12",),
    Emotion.NEGATIVE: ("AU4",),
    Emotion.SURPRISE: ("AU1", "AU2", "AU5"),
}

# (dx, dy) offsets from the face centre in units of image size, mirrored when
# symmetric, and the RGB change the AU produces at full intensity.
AU_LAYOUT: dict[str, tuple[float, float, bool, tuple[float, float, float]]] = {
    "AU1": (0.07, -0.23, True, (0.45, 0.45, 0.20)),
    "AU2": (0.23, -0.23, True, (0.20, 0.45, 0.45)),
    "AU4": (0.00, -0.14, False, (-0.45, -0.35, -0.35)),
    "AU5": (0.15, -0.09, True, (0.45, 0.45, 0.45)),
    "AU6": (0.20, 0.05, True, (0.30, 0.05, 0.05)),
    "AU7": (0.15, -0.05, True, (-0.25, -0.25, 0.05)),
    "AU9": (0.00, 0.02, False, (0.05, -0.25, -0.25)),
    "AU10": (0.00, 0.12, False, (0.30, 0.00, 0.20)),
    "AU12": (0.13, 0.18, True, (0.45, 0.45, -0.20)),
    "AU14": (0.17, 0.23, True, (-0.20, 0.20, 0.20)),
    "AU15": (0.12, 0.27, True, (-0.30, -0.10, 0.25)),
    "AU17": (0.00, 0.33, False, (0.20, 0.20, 0.45)),
}


@dataclass(frozen=True)
class SyntheticSpec:
    n_subjects: int = 6
    samples_per_subject: int = 12
    image_size: int = 64
    n_frames: int = 16
    noise: float = 0.0
    au_strength: float = 1.0
    distractors: int = 0
    # chance that a clip also shows another emotion's AU pattern, held static
    # across all frames; only the onset-to-apex change tells the two apart
    decoy_prob: float = 0.0
    # chance of a brief flash of another emotion's pattern near either end of
    # the clip, outside the 7-frame apex window
    transient_prob: float = 0.0
    seed: int = 0
    au_vocabulary: tuple[str, ...] = DEFAULT_AUS
    blueprint: Mapping[Emotion, tuple[str, ...]] = field(default_factory=lambda: dict(DEFAULT_BLUEPRINT))

    def validate(self):
        if self.n_subjects < 2:
            raise ValueError(f"need at least 2 subjects, got {self.n_subjects}")
        if self.samples_per_subject < 1:
            raise ValueError(f"need at least 1 sample per subject, got {self.samples_per_subject}")
        if self.image_size < 16:
            raise ValueError(f"image_size must be >= 16, got {self.image_size}")
        if self.n_frames < 8:
            raise ValueError(f"n_frames must be >= 8, got {self.n_frames}")
        if self.noise < 0 or self.au_strength <= 0 or self.distractors < 0:
            raise ValueError("noise and distractors must be non-negative, au_strength positive")
        for name in ("decoy_prob", "transient_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {getattr(self, name)}")
        if self.transient_prob > 0 and self.n_frames < 15:
            raise ValueError("transient decoys need n_frames >= 15 to stay clear of the apex window")
        if set(self.blueprint) != set(Emotion):
            raise ValueError("blueprint must define an AU set for each of the three emotions")
        sets = [frozenset(self.blueprint[e]) for e in Emotion]
        if len(set(sets)) != len(sets):
            raise ValueError("blueprint AU sets must differ between emotions")
        for aus in sets:
            unknown = aus - set(self.au_vocabulary)
            if unknown:
                raise ValueError(f"blueprint AUs {sorted(unknown)} missing from vocabulary")
            unplaced = aus - set(AU_LAYOUT)
            if unplaced:
                raise ValueError(f"no render layout for AUs {sorted(unplaced)}")

    @property
    def apex_index(self) -> int:
        return self.n_frames // 2


def intensity_profile(n_frames: int, apex: int) -> np.ndarray:
    """Triangular onset -> apex -> offset ramp with a unique maximum of 1 at ``apex``."""
    span = max(apex, n_frames - 1 - apex) + 1
    t = np.arange(n_frames)
    return 1.0 - np.abs(t - apex) / span


def emotion_from_aus(aus: set[str] | frozenset[str], blueprint: Mapping[Emotion, tuple[str, ...]]) -> Emotion:
    for emotion, pattern in blueprint.items():
        if frozenset(pattern) == frozenset(aus):
            return emotion
    raise ValueError(f"AU set {sorted(aus)} matches no blueprint entry")


@dataclass
class _Face:
    cx: float
    cy: float
    scale: float
    skin: np.ndarray
    # static identity marks: (dy, dx) offsets in face units and an RGB change
    marks: list[tuple[float, float, np.ndarray]] = field(default_factory=list)


def _subject_face(size: int, rng: np.random.Generator, n_marks: int = 0) -> _Face:
    face = _Face(
        cx=size / 2 + rng.uniform(-0.04, 0.04) * size,
        cy=size / 2 + rng.uniform(-0.04, 0.04) * size,
        scale=rng.uniform(0.92, 1.08),
        skin=np.array([0.72, 0.55, 0.45]) + rng.uniform(-0.08, 0.08, size=3),
    )
    colours = [np.asarray(v[3]) for v in AU_LAYOUT.values()]
    for _ in range(n_marks):
        dy, dx = rng.uniform(-0.3, 0.35), rng.uniform(-0.25, 0.25)
        face.marks.append((dy, dx, colours[rng.integers(len(colours))] * rng.uniform(0.3, 0.6)))
    return face


def _blob(yy, xx, cy, cx, sy, sx):
    return np.exp(-(((yy - cy) / sy) ** 2 + ((xx - cx) / sx) ** 2) / 2)


def _neutral(size: int, face: _Face) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    s = size * face.scale
    img = np.full((size, size, 3), 0.15)
    oval = (((xx - face.cx) / (0.36 * s)) ** 2 + ((yy - face.cy) / (0.46 * s)) ** 2) <= 1.0
    img[oval] = face.skin
    for side in (-1, 1):
        ex = face.cx + side * 0.15 * s
        eye = _blob(yy, xx, face.cy - 0.08 * s, ex, 0.03 * s, 0.05 * s)
        brow = _blob(yy, xx, face.cy - 0.17 * s, ex, 0.02 * s, 0.07 * s)
        img -= 0.5 * eye[..., None] + 0.3 * brow[..., None]
    mouth = _blob(yy, xx, face.cy + 0.2 * s, face.cx, 0.025 * s, 0.1 * s)
    img += mouth[..., None] * np.array([0.15, -0.25, -0.2])
    for dy, dx, colour in face.marks:
        img += _blob(yy, xx, face.cy + dy * s, face.cx + dx * s, 0.045 * s, 0.045 * s)[..., None] * colour
    return img


def _au_field(size: int, face: _Face, aus: tuple[str, ...]) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    s = size * face.scale
    field_ = np.zeros((size, size, 3))
    for au in aus:
        dx, dy, mirrored, colour = AU_LAYOUT[au]
        sides = (-1, 1) if mirrored else (1,)
        for side in sides:
            g = _blob(yy, xx, face.cy + dy * s, face.cx + side * dx * s, 0.045 * s, 0.045 * s)
            field_ += g[..., None] * np.asarray(colour)
    return field_


def transient_profile(n_frames: int, centre: int, half_width: int = 2) -> np.ndarray:
    """Short triangular flash peaking at ``centre``; zero more than ``half_width - 1`` frames away."""
    t = np.arange(n_frames)
    return np.clip(1.0 - np.abs(t - centre) / half_width, 0.0, None)


def render_clip(spec: SyntheticSpec, face: _Face, aus: tuple[str, ...], strength: float,
                rng: np.random.Generator,
                decoys: Sequence[tuple[tuple[str, ...], float, np.ndarray]] = ()) -> list[np.ndarray]:
    """Render one clip; each decoy is (AU set, strength, per-frame level)."""
    base = _neutral(spec.image_size, face)
    layers = [(_au_field(spec.image_size, face, aus), strength,
               intensity_profile(spec.n_frames, spec.apex_index))]
    layers += [(_au_field(spec.image_size, face, d_aus), d_strength, levels)
               for d_aus, d_strength, levels in decoys]
    frames = []
    for t in range(spec.n_frames):
        img = base.copy()
        for field_, amp, levels in layers:
            if levels[t]:
                img += spec.au_strength * amp * levels[t] * field_
        if spec.noise > 0:
            img = img + rng.normal(0.0, spec.noise, size=img.shape)
        frames.append((np.clip(img, 0.0, 1.0) * 255).round().astype(np.uint8))
    return frames


def _sample_decoys(spec: SyntheticSpec, emotion: Emotion, rng: np.random.Generator):
    def other_pattern():
        others = [e for e in Emotion if e != emotion]
        return tuple(spec.blueprint[others[rng.integers(len(others))]])

    decoys = []
    if spec.decoy_prob > 0 and rng.random() < spec.decoy_prob:
        decoys.append((other_pattern(), rng.uniform(0.75, 1.0), np.ones(spec.n_frames)))
    if spec.transient_prob > 0 and rng.random() < spec.transient_prob:
        centre = (2, spec.n_frames - 3)[rng.integers(2)]
        decoys.append((other_pattern(), rng.uniform(0.75, 1.0), transient_profile(spec.n_frames, centre)))
    return decoys


@dataclass
class SyntheticSample:
    subject: str
    emotion: Emotion
    aus: tuple[str, ...]
    frames: list[np.ndarray]
    apex_index: int


def generate_arrays(spec: SyntheticSpec) -> list[SyntheticSample]:
    """Render every sample in memory; emotions cycle so each subject is balanced."""
    spec.validate()
    width = len(str(spec.n_subjects))
    out = []
    for s in range(spec.n_subjects):
        face = _subject_face(spec.image_size, np.random.default_rng([spec.seed, s]), spec.distractors)
        subject = f"s{s + 1:0{width}d}"
        for k in range(spec.samples_per_subject):
            emotion = Emotion(k % 3)
            aus = tuple(spec.blueprint[emotion])
            rng = np.random.default_rng([spec.seed, s, k + 1])
            strength = rng.uniform(0.75, 1.0)
            frames = render_clip(spec, face, aus, strength, rng, _sample_decoys(spec, emotion, rng))
            out.append(SyntheticSample(subject, emotion, aus, frames, spec.apex_index))
    return out


def generate(spec: SyntheticSpec, out_dir: str | Path) -> Manifest:
    """Write frames as PNG files plus ``manifest.jsonl`` under ``out_dir``."""
    spec.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    counters: dict[str, int] = {}
    digits = len(str(spec.n_frames - 1))
    for sample in generate_arrays(spec):
        idx = counters.get(sample.subject, 0)
        counters[sample.subject] = idx + 1
        clip_dir = out_dir / sample.subject / f"clip_{idx:03d}"
        clip_dir.mkdir(parents=True, exist_ok=True)
        for t, frame in enumerate(sample.frames):
            Image.fromarray(frame).save(clip_dir / f"frame_{t:0{digits}d}.png")
        entries.append(ManifestEntry(clip_dir.resolve(), sample.subject, sample.emotion.label.lower(),
                                     sample.aus, sample.apex_index))
    manifest = Manifest("synthetic", tuple(spec.au_vocabulary), tuple(entries))
    manifest.write(out_dir / "manifest.jsonl")
    return manifest
