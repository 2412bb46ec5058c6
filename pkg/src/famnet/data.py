"""Dataset abstraction: emotion mapping, manifests, apex windows and LOSO folds."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import torch


class Emotion(enum.IntEnum):
    POSITIVE = 0
    NEGATIVE = 1
    SURPRISE = 2

    @property
    def label(self) -> str:
        return self.name.capitalize()


CLASS_NAMES = tuple(e.label for e in Emotion)

_CASME = {
    "happiness": Emotion.POSITIVE,
    "disgust": Emotion.NEGATIVE,
    "sadness": Emotion.NEGATIVE,
    "fear": Emotion.NEGATIVE,
    "surprise": Emotion.SURPRISE,
}
_SAMM = {
    "happiness": Emotion.POSITIVE,
    "sadness": Emotion.NEGATIVE,
    "contempt": Emotion.NEGATIVE,
    "anger": Emotion.NEGATIVE,
    "fear": Emotion.NEGATIVE,
    "disgust": Emotion.NEGATIVE,
    "surprise": Emotion.SURPRISE,
}
_SYNTHETIC = {e.label.lower(): e for e in Emotion}

EMOTION_TABLES: dict[str, dict[str, Emotion]] = {
    "casme2": _CASME,
    "casme3": _CASME,
    "samm": _SAMM,
    "mmew": _SAMM,
    "synthetic": _SYNTHETIC,
}

# native labels that fall outside the 3-class protocol; samples are dropped
EXCLUDED_LABELS: dict[str, frozenset[str]] = {
    "casme2": frozenset({"others", "repression", "depression"}),
    "casme3": frozenset({"others", "repression", "depression"}),
    "samm": frozenset({"others"}),
    "mmew": frozenset({"others"}),
    "synthetic": frozenset(),
}

_DATASET_ALIASES = {
    "casmeii": "casme2",
    "casme2": "casme2",
    "casme3": "casme3",
    "casme^3": "casme3",
    "cas(me)3": "casme3",
    "cas(me)^3": "casme3",
    "cas(me)³": "casme3",
    "samm": "samm",
    "mmew": "mmew",
    "synthetic": "synthetic",
}


class UnknownLabelError(ValueError):
    pass


def canonical_dataset(dataset_id: str) -> str:
    key = dataset_id.strip().lower().replace(" ", "").replace("-", "").replace("_", "")
    try:
        return _DATASET_ALIASES[key]
    except KeyError:
        raise ValueError(
            f"unsupported dataset {dataset_id!r}; expected one of {sorted(EMOTION_TABLES)}"
        ) from None


def map_emotion(raw_name: str, dataset_id: str) -> Emotion | None:
    """Map a dataset-native emotion name onto Positive/Negative/Surprise.

    Returns ``None`` for labels the 3-class protocol excludes (e.g. "others");
    the caller is expected to drop those samples. Anything else not in the
    dataset's table raises :class:`UnknownLabelError`.
    """
    dataset = canonical_dataset(dataset_id)
    name = raw_name.strip().lower()
    if name in EXCLUDED_LABELS[dataset]:
        return None
    try:
        return EMOTION_TABLES[dataset][name]
    except KeyError:
        raise UnknownLabelError(
            f"emotion label {raw_name!r} is not mapped for dataset {dataset_id!r}"
        ) from None


def encode_aus(names: Iterable[str], vocabulary: Sequence[str]) -> np.ndarray:
    """Binary AU vector over ``vocabulary``; unknown AU names raise."""
    index = {name: i for i, name in enumerate(vocabulary)}
    bits = np.zeros(len(vocabulary), dtype=np.float32)
    for name in names:
        if name not in index:
            raise ValueError(f"AU {name!r} not in vocabulary {list(vocabulary)}")
        bits[index[name]] = 1.0
    return bits


def expand_apex_neighbors(apex_index: int, length: int, radius: int = 3) -> list[int]:
    """Apex frame plus ``radius`` neighbours per side, shifted inward at clip edges."""
    window = 2 * radius + 1
    if length < window:
        raise ValueError(f"sequence of length {length} is shorter than {window} frames")
    if not 0 <= apex_index < length:
        raise ValueError(f"apex index {apex_index} outside sequence of length {length}")
    start = min(max(apex_index - radius, 0), length - window)
    return list(range(start, start + window))


@dataclass(frozen=True)
class ManifestEntry:
    clip_dir: Path
    subject: str
    emotion_raw: str
    aus: tuple[str, ...]
    apex_index: int

    def to_record(self, root: Path | None = None) -> dict:
        clip = self.clip_dir
        if root is not None:
            try:
                clip = clip.relative_to(root)
            except ValueError:
                pass
        return {
            "clip_dir": clip.as_posix(),
            "subject": self.subject,
            "emotion_raw": self.emotion_raw,
            "au_list": ";".join(self.aus),
            "apex_index": self.apex_index,
        }


@dataclass(frozen=True)
class Manifest:
    """Immutable list of samples with a declared dataset id and AU vocabulary.

    On disk this is JSON Lines: a header object carrying ``dataset_id`` and
    ``au_vocabulary``, then one record per sample. Relative ``clip_dir`` paths
    resolve against the manifest's directory.
    """

    dataset_id: str
    au_vocabulary: tuple[str, ...]
    entries: tuple[ManifestEntry, ...]

    def __post_init__(self):
        canonical_dataset(self.dataset_id)
        vocab = set(self.au_vocabulary)
        if len(vocab) != len(self.au_vocabulary):
            raise ValueError("au_vocabulary contains duplicates")
        for e in self.entries:
            if not e.subject:
                raise ValueError(f"entry {e.clip_dir} has an empty subject id")
            missing = set(e.aus) - vocab
            if missing:
                raise ValueError(f"entry {e.clip_dir} uses AUs outside the vocabulary: {sorted(missing)}")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def subjects(self) -> list[str]:
        return sorted({e.subject for e in self.entries})

    def emotion(self, entry: ManifestEntry) -> Emotion | None:
        return map_emotion(entry.emotion_raw, self.dataset_id)

    def labelled(self) -> "Manifest":
        """Drop entries whose emotion is outside the 3-class protocol."""
        kept = tuple(e for e in self.entries if self.emotion(e) is not None)
        return Manifest(self.dataset_id, self.au_vocabulary, kept)

    def select(self, subjects: Iterable[str]) -> "Manifest":
        wanted = set(subjects)
        kept = tuple(e for e in self.entries if e.subject in wanted)
        return Manifest(self.dataset_id, self.au_vocabulary, kept)

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        root = path.parent.resolve()
        lines = [json.dumps({"dataset_id": self.dataset_id, "au_vocabulary": list(self.au_vocabulary)})]
        lines += [json.dumps(e.to_record(root)) for e in self.entries]
        path.write_text("\n".join(lines) + "\n")
        return path

    @classmethod
    def read(cls, path: str | Path, check_paths: bool = True) -> "Manifest":
        path = Path(path)
        root = path.parent.resolve()
        with path.open() as fh:
            rows = [json.loads(line) for line in fh if line.strip()]
        if not rows:
            raise ValueError(f"manifest {path} is empty")
        header, records = rows[0], rows[1:]
        if "dataset_id" not in header or "au_vocabulary" not in header:
            raise ValueError(f"manifest {path} is missing its header line")
        entries = []
        for r in records:
            clip = Path(r["clip_dir"])
            if not clip.is_absolute():
                clip = root / clip
            if check_paths and not clip.is_dir():
                raise FileNotFoundError(f"clip directory {clip} listed in {path} does not exist")
            aus = tuple(a for a in str(r.get("au_list", "")).split(";") if a)
            entries.append(ManifestEntry(clip, str(r["subject"]), r["emotion_raw"], aus, int(r["apex_index"])))
        return cls(header["dataset_id"], tuple(header["au_vocabulary"]), tuple(entries))


@dataclass(frozen=True)
class Fold:
    test_subject: str
    train: frozenset[str]
    test: frozenset[str]


def loso_folds(manifest: Manifest | Sequence[str]) -> list[Fold]:
    """One fold per subject: that subject is the test set, the rest train."""
    subjects = manifest.subjects if isinstance(manifest, Manifest) else sorted(set(manifest))
    if len(subjects) < 2:
        raise ValueError(f"LOSO needs at least 2 subjects, got {len(subjects)}")
    everyone = frozenset(subjects)
    return [Fold(s, everyone - {s}, frozenset({s})) for s in subjects]


@dataclass
class Sample:
    """One network-ready micro-expression instance."""

    subject_id: str
    apex_frame: torch.Tensor  # (3, H, W)
    clip: torch.Tensor  # (3, H, W, D)
    emotion: Emotion
    aus: np.ndarray
    apex_index: int
    flagged: bool = field(default=False)
