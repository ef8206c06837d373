"""Command-line entry point.

Subcommands: ``synth`` (write a dataset), ``train`` (fit a model), ``eval``
(metrics CSV), ``localize`` (heatmap and mask PGMs for one scene), and
``gradcheck`` (finite-difference audit of the analytic gradients).

Exit codes: 0 success, 1 check failed, 2 usage/config error,
3 runtime numerical error, 4 internal retry exhaustion.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import grad, io, synth
from .config import load_config
from .evaluate import evaluate_localization, localize_scene
from .exceptions import (ConfigError, DegenerateVectorError, GradCheckResampleError,
                         ShapeError, TrainingDivergedError)
from .model import cluster_config_from, init_model_params
from .training import train

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_RETRIES = 4

GRADCHECK_TOLERANCE = 1e-4
GRADCHECK_MAX_RESAMPLES = 8


def _load_dataset(data_dir: Path):
    manifest = data_dir / "manifest.csv"
    if not manifest.exists():
        raise ConfigError(f"no manifest.csv under {data_dir}")
    scenes = []
    for _, filename, _, _, _ in io.read_manifest(manifest):
        scenes.append(io.read_scene(data_dir / filename))
    return scenes


def cmd_synth(args) -> int:
    config = load_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    generator = synth.SceneGenerator(synth.SceneSpec.from_run_config(config))
    entries = []
    for i in range(config.dataset_size):
        seed = synth.scene_seed(config.seed, i)
        scene = generator.generate_pair(seed)
        filename = f"scene_{i:05d}.avsc"
        io.write_scene(out / filename, scene)
        entries.append((i, filename, seed, len(scene.components),
                        sum(scene.silent_flags)))
    io.write_manifest(out / "manifest.csv", entries)
    print(f"wrote {config.dataset_size} scenes to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = load_config(args.config, args.seed)
    data_dir = Path(args.data)
    if not data_dir.exists():
        raise ConfigError(f"dataset directory {data_dir} does not exist")
    dataset = _load_dataset(data_dir)
    if len(dataset) < 2:
        raise ConfigError("training needs at least two scenes")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = train(dataset, config)
    io.save_model(out / "model.avcm", result.params)
    io.write_train_log(out / "train_log.csv", result.log)
    if result.log:
        print(f"trained {len(result.log)} iterations; "
              f"final loss {result.log[-1].loss:.6f}")
    else:
        print("trained 0 iterations; wrote initial parameters")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = load_config(args.config, args.seed)
    params = io.load_model(args.model)
    data_dir = Path(args.data)
    if not data_dir.exists():
        raise ConfigError(f"dataset directory {data_dir} does not exist")
    scenes = _load_dataset(data_dir)
    report = evaluate_localization(params, scenes, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_eval_csv(out / "metrics.csv", report)
    print(f"ciou@0.5={report.ciou_at_0_5:.4f} ciou@0.7={report.ciou_at_0_7:.4f} "
          f"auc={report.auc:.4f} match_accuracy={report.match_accuracy:.4f}")
    return EXIT_OK


def cmd_localize(args) -> int:
    config = load_config(args.config, args.seed)
    if args.threshold is not None:
        if not (0.0 <= args.threshold <= 1.0):
            raise ConfigError("threshold must lie in [0, 1]")
        threshold = args.threshold
    else:
        threshold = config.localize_threshold
    params = io.load_model(args.model)
    scene = io.read_scene(args.scene)
    loc = localize_scene(params, scene, config)
    mask = (loc.heatmap.values >= threshold).astype(np.uint8)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_pgm(out / "heatmap.pgm", loc.heatmap.values)
    io.write_pgm(out / "mask.pgm", mask.astype(np.float64))
    print(f"chosen cluster {loc.chosen_cluster}; wrote heatmap.pgm and mask.pgm to {out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    config = load_config(args.config, args.seed)
    cluster_cfg = cluster_config_from(config)
    spec = synth.SceneSpec.from_run_config(config)
    generator = synth.SceneGenerator(spec)
    params = init_model_params(config)
    corrupt = "projections" if args.corrupt_gradient else None
    report = None
    for attempt in range(GRADCHECK_MAX_RESAMPLES):
        seed = synth.scene_seed(config.seed, 7000 + attempt)
        scenes = [generator.generate_pair(synth.scene_seed(seed, i)) for i in range(4)]
        batch = synth.make_batch(scenes, [0, 1], seed=seed)
        try:
            report = grad.grad_check(params, batch, cluster_cfg, config.margin,
                                     config.pairing, seed=config.seed,
                                     corrupt_block=corrupt)
            break
        except GradCheckResampleError:
            continue
    if report is None:
        raise GradCheckResampleError(
            f"no kink-free batch found in {GRADCHECK_MAX_RESAMPLES} resamples")
    for name, err in report.block_errors:
        print(f"{name}: rel error {err:.3e}")
    print(f"max rel error {report.max_rel_error:.3e} (h={report.step:g})")
    if report.passed(GRADCHECK_TOLERANCE):
        print("gradcheck PASSED")
        return EXIT_OK
    print("gradcheck FAILED")
    return EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="avclust",
                                     description="audiovisual soft-clustering toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene dataset")
    p.add_argument("--config", default=None, help="config file (key = value lines)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model on a scene dataset")
    p.add_argument("data", help="dataset directory (from `avclust synth`)")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory for model + log")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="localization + correspondence metrics")
    p.add_argument("model", help="model file")
    p.add_argument("data", help="dataset directory")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory for metrics.csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("localize", help="heatmap and mask PGMs for one scene")
    p.add_argument("model", help="model file")
    p.add_argument("scene", help="scene file")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=None,
                   help="binarization threshold (default: config localize_threshold)")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("gradcheck", help="finite-difference audit of the gradients")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, ShapeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateVectorError, TrainingDivergedError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GradCheckResampleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RETRIES


if __name__ == "__main__":
    sys.exit(main())
