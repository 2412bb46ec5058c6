"""Named settings for desk-scale (single CPU) experiments.

``benchmark_spec`` is the synthetic set used by the acceptance suite and the
scripts; ``desk_config`` is the matching training configuration. Both are
plain dataclass instances, so callers tweak them with ``dataclasses.replace``.
"""

from __future__ import annotations

from .synthetic import SyntheticSpec
from .training import TrainConfig

DESK_BATCH_3D = 8


def benchmark_spec(seed: int = 0) -> SyntheticSpec:
    """6 subjects x 12 clips at 64 px, with both static and transient decoys.

    15 frames put the apex (frame 7) on the uniform 8-frame sampling grid.
    """
    return SyntheticSpec(n_subjects=6, samples_per_subject=12, image_size=64, n_frames=15,
                         noise=0.12, au_strength=0.28, distractors=4, decoy_prob=0.2,
                         transient_prob=0.5, seed=seed)


def desk_config(**overrides) -> TrainConfig:
    """Width-0.25 Dual+HA 2D settings; the ablation derives the other rows from it."""
    values = dict(branch="2d", task_mode="dual", attention=True, width=0.25, image_size=64, depth=8,
                  lr=1e-3, decay=0.95, epochs=50, batch_size=16, neighbors="random", seed=0)
    values.update(overrides)
    return TrainConfig(**values)
