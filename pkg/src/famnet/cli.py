"""Command-line entry point: ``famnet synth|train|eval|ablate|report``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import yaml

from .data import Emotion, Manifest
from .metrics import MetricsReport, plot_confusion
from .synthetic import SyntheticSpec, generate
from .training import TrainConfig, config_hash, run_ablation, run_eval, run_loso

log = logging.getLogger("famnet")

OUTPUT_ROOT_ENV = "FAMNET_OUTPUT_ROOT"
EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# flag dest -> (config section, field)
SYNTH_FLAGS = {
    "subjects": "n_subjects", "per_subject": "samples_per_subject", "image_size": "image_size",
    "frames": "n_frames", "noise": "noise", "au_strength": "au_strength",
    "distractors": "distractors", "decoy_prob": "decoy_prob", "transient_prob": "transient_prob",
    "seed": "seed",
}
TRAIN_FLAGS = {
    "branch": "branch", "task": "task_mode", "lr": "lr", "decay": "decay", "epochs": "epochs",
    "batch_size": "batch_size", "width": "width", "image_size": "image_size", "depth": "depth",
    "seed": "seed", "neighbors": "neighbors", "au_weighting": "au_weighting",
}


def _parse_value(text: str):
    return yaml.safe_load(text)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file {p} not found")
    data = yaml.safe_load(p.read_text()) or {}
    if not isinstance(data, dict):
        raise UsageError(f"config file {p} must hold a mapping of sections")
    return data


def _resolve(args, section: str, flags: dict[str, str]) -> tuple[dict, list[str]]:
    """Config-file section, then CLI flags, then ``--set section.key=value``."""
    values = dict(_load_config(args.config).get(section, {}) or {})
    overrides = []
    for dest, key in flags.items():
        val = getattr(args, dest, None)
        if val is not None:
            values[key] = val
            overrides.append(f"{section}.{key}={val}")
    if getattr(args, "no_attention", False):
        values["attention"] = False
        values["task_mode"] = "single"
        overrides.append(f"{section}.attention=False")
    if getattr(args, "no_augment", False):
        values["augment"] = False
        overrides.append(f"{section}.augment=False")
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        sec, _, field = key.rpartition(".")
        if sec and sec != section:
            continue
        values[field] = _parse_value(raw)
        overrides.append(f"{section}.{field}={raw}")
    return values, overrides


def _out_dir(args) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        out = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs")) / args.command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_resolved(out: Path, command: str, resolved: dict, overrides: list[str]) -> Path:
    payload = {"command": command, "config_hash": config_hash(resolved), "overrides": overrides, **resolved}
    path = out / "resolved_config.yaml"
    path.write_text(yaml.safe_dump(payload, sort_keys=False))
    return path


def _build(cls, values: dict):
    try:
        return cls(**values)
    except TypeError as exc:
        raise UsageError(f"bad {cls.__name__} fields: {exc}") from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _manifest(path: str) -> Manifest:
    if not Path(path).is_file():
        raise FileNotFoundError(f"manifest {path} not found")
    return Manifest.read(path)


def cmd_synth(args) -> int:
    values, overrides = _resolve(args, "synthetic", SYNTH_FLAGS)
    spec = _build(SyntheticSpec, values)
    try:
        spec.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = _out_dir(args)
    resolved = {"synthetic": {k: v for k, v in dataclasses.asdict(spec).items() if k != "blueprint"}}
    resolved["synthetic"]["blueprint"] = {e.label: list(a) for e, a in spec.blueprint.items()}
    resolved["synthetic"]["au_vocabulary"] = list(spec.au_vocabulary)
    _write_resolved(out, "synth", resolved, overrides)
    manifest = generate(spec, out)
    print(f"wrote {len(manifest)} samples to {out / 'manifest.jsonl'}")
    return EXIT_OK


def _train_config(args) -> tuple[TrainConfig, list[str]]:
    values, overrides = _resolve(args, "train", TRAIN_FLAGS)
    if "branch" in values:
        values["branch"] = str(values["branch"]).lower()
    return _build(TrainConfig, values), overrides


def cmd_train(args) -> int:
    config, overrides = _train_config(args)
    if config.branch == "fused":
        raise UsageError("train builds one branch; use `eval --branch fused` to fuse two trained branches")
    manifest = _manifest(args.manifest)
    out = _out_dir(args)
    _write_resolved(out, "train", {"train": config.to_dict(), "manifest": str(args.manifest)}, overrides)
    result = run_loso(config, manifest, parallel=args.parallel_folds)
    paths = result.save(out, dataset=manifest.dataset_id)
    print(f"UAR={result.uar:.4f} UF1={result.uf1:.4f} -> {paths['metrics']}")
    return EXIT_OK


def cmd_eval(args) -> int:
    manifest = _manifest(args.manifest)
    branch = args.branch.lower()
    checkpoints = {}
    if args.ckpt2d:
        checkpoints["2d"] = Path(args.ckpt2d)
    if args.ckpt3d:
        checkpoints["3d"] = Path(args.ckpt3d)
    needed = ("2d", "3d") if branch == "fused" else (branch,)
    for b in needed:
        if b not in checkpoints:
            raise UsageError(f"eval --branch {branch} needs --ckpt{b}")
        if not checkpoints[b].is_dir():
            raise FileNotFoundError(f"{b} checkpoint directory {checkpoints[b]} not found")
    out = _out_dir(args)
    resolved = {"eval": {"branch": branch, **{f"ckpt{k}": str(v) for k, v in checkpoints.items()}},
                "manifest": str(args.manifest)}
    _write_resolved(out, "eval", resolved, [])
    result = run_eval(branch, manifest, checkpoints)
    from .metrics import emit_report
    paths = emit_report(result.report, out, dataset=manifest.dataset_id, config_hash=config_hash(resolved))
    print(f"UAR={result.uar:.4f} UF1={result.uf1:.4f} -> {paths['metrics']}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    config, overrides = _train_config(args)
    file_cfg = _load_config(args.config).get("ablation", {}) or {}
    b3 = args.batch_size_3d if args.batch_size_3d is not None else file_cfg.get("batch_size_3d")
    manifest = _manifest(args.manifest)
    out = _out_dir(args)
    _write_resolved(out, "ablate", {"train": config.to_dict(), "ablation": {"batch_size_3d": b3},
                                    "manifest": str(args.manifest)}, overrides)
    result = run_ablation(manifest, config, batch_size_3d=b3, parallel=args.parallel_folds)
    result.save(out, dataset=manifest.dataset_id)
    print(result.table())
    return EXIT_OK


def cmd_report(args) -> int:
    run = Path(args.run)
    table = run / "ablation.json"
    if table.is_file():
        for row in json.loads(table.read_text()):
            print(f"{row['method']:<16} UAR={row['uar']:.4f} UF1={row['uf1']:.4f}")
        return EXIT_OK
    metrics = run / "metrics.json"
    if not metrics.is_file():
        raise FileNotFoundError(f"no metrics.json or ablation.json in {run}")
    data = json.loads(metrics.read_text())
    report = MetricsReport.from_dict(data)
    plot_confusion(report.confusion, report.class_names, run / "metrics_confusion.png", data.get("dataset", ""))
    print(f"dataset={data.get('dataset', '')} samples={report.n_samples} "
          f"UAR={report.uar:.4f} UF1={report.uf1:.4f}")
    means = report.fold_means()
    if means:
        print(f"per-fold mean UAR={means['uar']:.4f} UF1={means['uf1']:.4f}")
    names = [e.label for e in Emotion]
    print("true\\pred " + " ".join(f"{n:>9}" for n in names))
    for n, row in zip(names, report.confusion):
        print(f"{n:<9} " + " ".join(f"{v:>9d}" for v in row))
    return EXIT_OK


def _add_common(p):
    p.add_argument("--config", help="YAML file with synthetic/train/ablation sections")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ROOT_ENV}/<command>)")
    p.add_argument("--seed", type=int)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field")


def _add_train_flags(p):
    p.add_argument("--manifest", required=True)
    p.add_argument("--branch", choices=["2d", "3d", "2D", "3D"])
    p.add_argument("--task", choices=["single", "dual"])
    p.add_argument("--no-attention", action="store_true", help="plain-backbone baseline")
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--lr", type=float)
    p.add_argument("--decay", type=float, help="per-epoch exponential LR decay factor")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--width", type=float, help="channel width multiplier")
    p.add_argument("--image-size", type=int)
    p.add_argument("--depth", type=int, help="clip depth for the 3D branch")
    p.add_argument("--neighbors", choices=["all", "random", "apex"])
    p.add_argument("--au-weighting", choices=["uniform", "inverse_freq"])
    p.add_argument("--parallel-folds", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="famnet", description=__doc__)
    parser.add_argument("--log-level", default="INFO")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic dataset and manifest")
    _add_common(p)
    p.add_argument("--subjects", type=int)
    p.add_argument("--per-subject", type=int)
    p.add_argument("--image-size", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--au-strength", type=float)
    p.add_argument("--distractors", type=int)
    p.add_argument("--decoy-prob", type=float, help="chance of a static wrong-emotion pattern per clip")
    p.add_argument("--transient-prob", type=float, help="chance of a brief off-apex wrong-emotion flash")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="LOSO training of one branch")
    _add_common(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score saved fold checkpoints, optionally fused")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--branch", required=True, choices=["2d", "3d", "fused"])
    p.add_argument("--ckpt2d", help="directory of 2D fold_<subject>.pt checkpoints")
    p.add_argument("--ckpt3d", help="directory of 3D fold_<subject>.pt checkpoints")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the six-row ablation grid")
    _add_common(p)
    _add_train_flags(p)
    p.add_argument("--batch-size-3d", type=int)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="print and re-render a finished run's metrics")
    p.add_argument("run", help="run directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"famnet {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - any failure maps to the runtime exit code
        log.debug("command failed", exc_info=True)
        print(f"famnet {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
