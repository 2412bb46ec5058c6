#!/usr/bin/env python3
"""Save a contact sheet of synthetic clips: one row per clip, one column per frame.

    python3 scripts/preview_synthetic.py --out preview.png --decoy-prob 1 --transient-prob 0
"""

import argparse
from dataclasses import replace

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from famnet.presets import benchmark_spec  # noqa: E402
from famnet.synthetic import generate_arrays  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="synthetic_preview.png")
    ap.add_argument("--rows", type=int, default=6)
    ap.add_argument("--noise", type=float, default=None)
    ap.add_argument("--decoy-prob", type=float, default=None)
    ap.add_argument("--transient-prob", type=float, default=None)
    args = ap.parse_args()

    spec = replace(benchmark_spec(), n_subjects=2, samples_per_subject=max(3, args.rows))
    for field, value in (("noise", args.noise), ("decoy_prob", args.decoy_prob),
                         ("transient_prob", args.transient_prob)):
        if value is not None:
            spec = replace(spec, **{field: value})
    samples = generate_arrays(spec)[:args.rows]
    n = spec.n_frames
    fig, axes = plt.subplots(len(samples), n, figsize=(n * 0.9, len(samples) * 1.0))
    for r, sample in enumerate(samples):
        for t in range(n):
            ax = axes[r, t]
            ax.imshow(sample.frames[t])
            ax.set_xticks([])
            ax.set_yticks([])
            if t == 0:
                ax.set_ylabel(sample.emotion.label, fontsize=7)
            if r == 0:
                ax.set_title("apex" if t == sample.apex_index else str(t), fontsize=7)
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
