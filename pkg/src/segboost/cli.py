"""Command-line surface: synth, train, infer, refine, eval.

Exit codes: 0 success, 1 configuration error, 2 data/format error,
3 training divergence.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, classifier as clf, io, synth
from .core import (
    DimensionError,
    LabelMap,
    ParameterError,
    ProbMap,
    RasterImage,
    Taxonomy,
    argmax_labels,
    default_taxonomy,
)
from .dsl import DslError, parse_rules, serialize_rules
from .loop import Pipeline, PipelineConfig, Scene, infer, train_pipeline
from .metrics import evaluate
from .reasoner import correct_labels, infer_channels, post_correction_state
from .rules import RuleBase, RuleKind, build_channel_rules, build_correction_rules
from .spatial import build_graph
from .superpixel import units_from_labels

EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3

# Training settings tuned for the synthetic benchmark; written into the
# run.cfg that `segboost synth` emits next to the scenes.
BENCHMARK_CONFIG = {
    "k_target": 1000,
    "compactness": 10.0,
    "f_t": 0.7,
    "max_iterations": 3,
    "convergence_epsilon": 0.0,
    "window_radius": 0,
    "learning_rate": 0.05,
    "epochs": 120,
    "batch": 4096,
    "seed": 0,
    "taxonomy_file": "taxonomy.txt",
}

_CONFIG_KEYS = {
    "k_target": int,
    "compactness": float,
    "f_t": float,
    "max_iterations": int,
    "convergence_epsilon": float,
    "window_radius": int,
    "hidden": int,
    "learning_rate": float,
    "adam_beta1": float,
    "adam_beta2": float,
    "adam_eps": float,
    "epochs": int,
    "batch": int,
    "seed": int,
    "taxonomy_file": str,
    "rules_file": str,
}


def _pipeline_config(values: dict[str, str]) -> PipelineConfig:
    parsed: dict[str, object] = {}
    for key, raw in values.items():
        if key not in _CONFIG_KEYS:
            raise io.ConfigError(f"unknown config key {key!r}")
        try:
            parsed[key] = _CONFIG_KEYS[key](raw)
        except ValueError as exc:
            raise io.ConfigError(f"bad value for {key!r}: {raw!r}") from exc
    training_keys = {
        "learning_rate", "adam_beta1", "adam_beta2", "adam_eps", "epochs", "batch",
    }
    training = {k: parsed.pop(k) for k in list(parsed) if k in training_keys}
    training["seed"] = parsed.get("seed", 0)
    try:
        return PipelineConfig(training=clf.TrainingConfig(**training), **parsed)  # type: ignore[arg-type]
    except ValueError as exc:
        raise io.ConfigError(str(exc)) from exc


def _load_rule_bases(
    path: Path | None, taxonomy: Taxonomy
) -> tuple[RuleBase, RuleBase]:
    if path is None:
        return build_correction_rules(taxonomy), build_channel_rules(taxonomy)
    base = parse_rules(path.read_text(), taxonomy)
    correction = RuleBase(rules=base.of_kind(RuleKind.CORRECTION), taxonomy=taxonomy)
    channel_rules = tuple(
        r for r in base.rules if r.kind in (RuleKind.SHADOW, RuleKind.ELEVATION)
    )
    return correction, RuleBase(rules=channel_rules, taxonomy=taxonomy)


def _load_scene(data_dir: Path, name: str, taxonomy: Taxonomy) -> Scene:
    image_path = data_dir / f"{name}.image.cbft"
    labels_path = data_dir / f"{name}.labels.png"
    if not image_path.exists() or not labels_path.exists():
        raise FileNotFoundError(f"scene files for {name!r} missing under {data_dir}")
    data = io.read_tensor(image_path).astype(np.float64)
    image = RasterImage(data=np.clip(data, 0.0, 1.0))
    truth = io.read_label_raster(labels_path, taxonomy)
    return Scene(name=name, image=image, truth=truth)


# ---------------------------------------------------------------------------
# commands

def cmd_synth(args: argparse.Namespace) -> int:
    if args.n < 1:
        print("error: --n must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    taxonomy = default_taxonomy()
    scenes = synth.generate_benchmark(args.n, args.seed, width=args.size, height=args.size)
    split = synth.split_benchmark([name for name, _, _ in scenes], seed=args.seed)

    for i, (name, image, truth) in enumerate(scenes):
        io.write_tensor(out / f"{name}.image.cbft", image.data.astype(np.float32))
        io.write_label_raster(out / f"{name}.labels.png", truth)
        spec = synth.benchmark_scene_spec(
            seed=(args.seed * 1_000_003 + i) % (2**31 - 1), width=args.size, height=args.size
        )
        (out / f"{name}.spec.txt").write_text(synth.spec_to_text(spec))
        if args.corrupt:
            model = synth.default_corruption_model(taxonomy, seed=spec.seed)
            probs = synth.corrupt_probmap(truth, model)
            io.write_tensor(out / f"{name}.probmap.cbft", probs.probs.astype(np.float32))

    (out / "split.txt").write_text(
        "\n".join(f"{name}\t{part}" for name, part in sorted(split.items())) + "\n"
    )
    io.write_taxonomy(out / "taxonomy.txt", taxonomy)
    io.write_config_file(out / "run.cfg", {**BENCHMARK_CONFIG, "seed": args.seed})
    print(f"wrote {len(scenes)} scenes to {out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    if not config_path.exists():
        print(f"error: config file not found: {config_path}", file=sys.stderr)
        return EXIT_CONFIG
    values = io.read_config_file(config_path)
    for key, value in args.overrides.items():
        values[key] = str(value)
    cfg = _pipeline_config(values)

    data_dir = Path(args.data)
    base_dir = config_path.parent
    taxonomy = (
        io.read_taxonomy(base_dir / cfg.taxonomy_file) if cfg.taxonomy_file else default_taxonomy()
    )
    rules_path = (base_dir / cfg.rules_file) if cfg.rules_file else None
    correction_rules, channel_rules = _load_rule_bases(rules_path, taxonomy)

    split_path = data_dir / "split.txt"
    if not split_path.exists():
        raise FileNotFoundError(f"split file not found: {split_path}")
    split: dict[str, list[str]] = {"train": [], "val": [], "test": []}
    for line in split_path.read_text().splitlines():
        if line.strip():
            name, part = line.split("\t")
            split.setdefault(part, []).append(name)
    train_scenes = [_load_scene(data_dir, n, taxonomy) for n in split["train"]]
    val_scenes = [_load_scene(data_dir, n, taxonomy) for n in split["val"]]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    artifacts: list[str] = []

    def on_iteration(record, params, logs):
        ckpt = out / f"checkpoint_iter_{record.iteration}.npz"
        clf.save_params(ckpt, params)
        log_path = out / f"corrections_iter_{record.iteration}.csv"
        rows = []
        for scene_name, log in logs:
            for e in log.entries:
                rows.append(
                    (scene_name, e.unit_id, taxonomy.name_of(e.old_class), taxonomy.name_of(e.new_class), e.rule_id)
                )
        io.write_correction_log_csv(log_path, rows)
        artifacts.extend([str(ckpt), str(log_path)])

    pipeline, history = train_pipeline(
        train_scenes,
        val_scenes,
        cfg,
        taxonomy=taxonomy,
        correction_rules=correction_rules,
        channel_rules=channel_rules,
        jobs=args.jobs,
        on_iteration=on_iteration,
    )

    best_path = out / "checkpoint_best.npz"
    clf.save_params(best_path, pipeline.require_trained())
    metrics_path = out / "metrics.csv"
    io.write_history_csv(metrics_path, history)
    io.write_taxonomy(out / "taxonomy.txt", taxonomy)
    rules_out = out / "rules.used.rules"
    rules_out.write_text(
        serialize_rules(correction_rules.merged_with(channel_rules))
    )
    artifacts.extend([str(best_path), str(metrics_path), str(out / "taxonomy.txt"), str(rules_out)])

    manifest = {
        "command": "train",
        "version": __version__,
        "config": {k: str(v) for k, v in values.items()},
        "config_file": str(config_path),
        "data_dir": str(data_dir),
        "out_dir": str(out),
        "scenes": {"train": split["train"], "val": split["val"]},
        "seed": cfg.seed,
        "best_iteration": pipeline.best_iteration,
        "artifacts": artifacts,
    }
    io.write_manifest(out / "manifest.json", manifest)
    print(
        f"trained {len(history)} iteration(s); best iteration {pipeline.best_iteration} "
        f"(stage2 OA {max(r.stage2_oa for r in history):.4f}); outputs in {out}"
    )
    return 0


def _rebuild_pipeline(run_dir: Path) -> Pipeline:
    manifest = io.read_manifest(run_dir / "manifest.json")
    cfg = _pipeline_config(dict(manifest["config"]))
    taxonomy = io.read_taxonomy(run_dir / "taxonomy.txt")
    correction_rules, channel_rules = _load_rule_bases(run_dir / "rules.used.rules", taxonomy)
    params = clf.load_params(run_dir / "checkpoint_best.npz")
    pipeline = Pipeline(cfg, taxonomy, correction_rules, channel_rules, params=params)
    pipeline.best_iteration = int(manifest.get("best_iteration", 0))
    return pipeline


def cmd_infer(args: argparse.Namespace) -> int:
    run_dir = Path(args.run)
    ckpt = run_dir / "checkpoint_best.npz"
    if not run_dir.exists() or not ckpt.exists():
        print(f"error: no checkpoint under {run_dir}", file=sys.stderr)
        return EXIT_DATA
    try:
        pipeline = _rebuild_pipeline(run_dir)
    except Exception as exc:
        print(f"error: cannot load checkpoint: {exc}", file=sys.stderr)
        return EXIT_DATA

    data = io.read_tensor(Path(args.image)).astype(np.float64)
    image = RasterImage(data=np.clip(data, 0.0, 1.0))
    stage1, stage2, log = infer(pipeline, image)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.stage in ("1", "both"):
        io.write_label_raster(out / "stage1.png", stage1)
    if args.stage in ("2", "both"):
        io.write_label_raster(out / "stage2.png", stage2)
        taxonomy = pipeline.taxonomy
        rows = [
            ("", e.unit_id, taxonomy.name_of(e.old_class), taxonomy.name_of(e.new_class), e.rule_id)
            for e in log.entries
        ]
        io.write_correction_log_csv(out / "corrections.csv", rows)
    print(f"wrote inference outputs to {out}")
    return 0


def cmd_refine(args: argparse.Namespace) -> int:
    taxonomy = io.read_taxonomy(Path(args.taxonomy)) if args.taxonomy else default_taxonomy()
    correction_rules, channel_rules = _load_rule_bases(
        Path(args.rules) if args.rules else None, taxonomy
    )
    probs = clf.ingest_probmap(Path(args.probmap))
    if probs.n != taxonomy.n:
        raise DimensionError(
            f"probability map has {probs.n} classes, taxonomy has {taxonomy.n}"
        )
    labels, conf = argmax_labels(probs, taxonomy)
    units = units_from_labels(labels, conf, args.f_t)
    graph = build_graph(units, labels.width, labels.height)
    corrected, log = correct_labels(units, graph, correction_rules, labels)
    state = post_correction_state(units, log)
    channels = infer_channels(units, graph, channel_rules, state)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_label_raster(out / "corrected.png", corrected)
    io.write_tensor(out / "shadow.cbft", channels.shadow)
    io.write_tensor(out / "elevation.cbft", channels.elevation)
    rows = [
        ("", e.unit_id, taxonomy.name_of(e.old_class), taxonomy.name_of(e.new_class), e.rule_id)
        for e in log.entries
    ]
    io.write_correction_log_csv(out / "corrections.csv", rows)
    print(f"applied {len(log)} corrections; outputs in {out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    truth = io.read_label_raster(Path(args.truth))
    rows = []
    for stage, pred_path in enumerate(args.pred, start=1):
        pred = io.read_label_raster(Path(pred_path), truth.taxonomy)
        if pred.labels.shape != truth.labels.shape:
            raise DimensionError(
                f"{pred_path}: shape {pred.labels.shape} does not match truth {truth.labels.shape}"
            )
        m = evaluate(pred, truth)
        names = [c.name for c in truth.taxonomy.classes]
        rows.append(io.metrics_row(0, stage, m.oa, m.miou, m.per_class_iou, names))
        print(f"{pred_path}: OA {m.oa:.4f}  mIOU {m.miou:.4f}")
    if args.out:
        io.write_metrics_csv(args.out, rows, [c.name for c in truth.taxonomy.classes])
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="segboost", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic benchmark")
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--size", type=int, default=96)
    p.add_argument("--out", required=True)
    p.add_argument("--corrupt", action="store_true", help="also write corrupted probability maps")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="run the closed training loop")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    for flag, key in [
        ("--max-iterations", "max_iterations"),
        ("--seed", "seed"),
        ("--k-target", "k_target"),
        ("--f-t", "f_t"),
        ("--epochs", "epochs"),
        ("--learning-rate", "learning_rate"),
        ("--window-radius", "window_radius"),
        ("--batch", "batch"),
        ("--hidden", "hidden"),
        ("--convergence-epsilon", "convergence_epsilon"),
    ]:
        p.add_argument(flag, dest=f"override_{key}", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="two-stage inference with a trained run")
    p.add_argument("--run", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stage", choices=["1", "2", "both"], default="both")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("refine", help="standalone reasoning over a probability map")
    p.add_argument("--probmap", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rules", default=None)
    p.add_argument("--taxonomy", default=None)
    p.add_argument("--f-t", dest="f_t", type=float, default=0.7)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("eval", help="accuracy and IoU of prediction rasters")
    p.add_argument("--truth", required=True)
    p.add_argument("--pred", action="append", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "train":
        args.overrides = {
            key[len("override_") :]: value
            for key, value in vars(args).items()
            if key.startswith("override_") and value is not None
        }
    try:
        return args.func(args)
    except (io.ConfigError, DslError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except clf.TrainingDivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (io.FormatError, DimensionError, ParameterError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
