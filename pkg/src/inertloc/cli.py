"""Command-line orchestration: map derivation, dataset synthesis, training,
inference, evaluation, and SVG reports.

Exit codes: 0 success, 2 input error, 3 degenerate data, 4 training failure,
5 alignment error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import formats, metrics, report
from .config import load_experiment
from .errors import (AlignmentError, ConfigError, DegenerateDataError,
                     InvalidInputError, OptimizationFailure, ShapeError,
                     TrainingDiverged, WindowError)
from .gridworld import GridMap, Trajectory, derive_walkable, distance_cost_field
from .model import ModelConfig, TwoBranchLocalizer, fit
from .runners import ModelRunner, make_runner
from .synth import SynthConfig, sample_rng, synthesize_trajectory
from .velocity import VelocitySequence, perturb, random_rotation

EXIT_INPUT = 2
EXIT_DEGENERATE = 3
EXIT_TRAINING = 4
EXIT_ALIGNMENT = 5


def _load_trajectories(directory: Path):
    files = sorted(directory.glob("*.csv"))
    return [formats.load_trajectory_csv(f) for f in files]


def cmd_derive_map(args) -> int:
    traj_dir = Path(args.traj_dir)
    if not traj_dir.is_dir():
        raise InvalidInputError(f"{traj_dir} is not a directory")
    trajectories = _load_trajectories(traj_dir)
    if not trajectories:
        raise InvalidInputError("no trajectories")
    if args.width and args.height:
        extent = (args.width, args.height)
    else:
        hi = np.max([t.xy.max(axis=0) for t in trajectories], axis=0)
        extent = (int(np.ceil(hi[0])) + 1, int(np.ceil(hi[1])) + 1)
    gmap = derive_walkable(trajectories, extent, args.resolution)
    formats.save_map_pgm(gmap, args.out)
    print(f"walkable pixels: {int(np.count_nonzero(gmap.walkable))}")
    return 0


def cmd_synthesize(args) -> int:
    gmap = formats.load_map_pgm(args.map)
    if np.count_nonzero(gmap.walkable) < 2:
        raise DegenerateDataError("map has fewer than two walkable pixels")
    cfg = SynthConfig(smoothing_s=args.smoothing_s, noise_sigma=args.noise_sigma,
                      max_nlls_iters=args.max_nlls_iters)
    field = distance_cost_field(gmap)
    out = Path(args.out_dir)
    (out / "traj").mkdir(parents=True, exist_ok=True)
    (out / "vel").mkdir(parents=True, exist_ok=True)
    samples = []
    for i in range(args.count):
        rng = sample_rng(args.seed, i)
        result = synthesize_trajectory(gmap, field, cfg, rng,
                                       min_separation=args.min_separation)
        name = f"{i:05d}.csv"
        formats.save_trajectory_csv(result.gt, out / "traj" / name)
        formats.save_velocity_csv(result.vel.vectors, out / "vel" / name)
        samples.append({"id": i, "seed": [args.seed, i],
                        "traj": f"traj/{name}", "vel": f"vel/{name}"})
    manifest = {"root_seed": args.seed, "map": str(args.map),
                "noise_sigma": cfg.noise_sigma, "smoothing_s": cfg.smoothing_s,
                "min_separation": args.min_separation, "samples": samples}
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    print(f"wrote {len(samples)} trajectory/velocity pairs to {out}")
    return 0


def _load_dataset(directory: Path):
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise InvalidInputError(f"{manifest_path} not found")
    with open(manifest_path) as f:
        manifest = json.load(f)
    dataset = []
    for sample in manifest["samples"]:
        gt = formats.load_trajectory_csv(directory / sample["traj"])
        vel, _ = formats.load_velocity_csv(directory / sample["vel"])
        dataset.append((vel, gt.xy))
    return dataset, manifest


def _make_augment(acfg):
    def augment(window, rng):
        seq = VelocitySequence(window)
        seq = perturb(seq, acfg, rng)
        if acfg.rotate:
            seq, _ = random_rotation(seq, rng)
        return seq.vectors
    return augment


def cmd_train(args) -> int:
    cfg = load_experiment(args.config)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    dataset, _ = _load_dataset(Path(cfg.dataset_dir))
    ckpt_path = out / "model.ckpt"
    log_path = out / "train_log.csv"

    start_epoch = 0
    initial_history: list[float] = []
    if args.resume and ckpt_path.exists():
        model = TwoBranchLocalizer.load(ckpt_path)
        if log_path.exists():
            with open(log_path, newline="") as f:
                rows = list(csv.DictReader(f))
            if rows:
                start_epoch = int(rows[-1]["epoch"]) + 1
                initial_history = [float(r["val_loss"]) for r in rows]
    else:
        model = TwoBranchLocalizer(cfg.model, seed=cfg.seed)
        if log_path.exists():
            log_path.unlink()

    augment = _make_augment(cfg.augment) if cfg.use_augment else None
    write_header = not log_path.exists()
    logf = open(log_path, "a", newline="")
    writer = csv.writer(logf)
    if write_header:
        writer.writerow(["epoch", "lr", "r_teacher", "train_loss", "val_loss"])

    def log_row(row):
        writer.writerow([row["epoch"], repr(row["lr"]), repr(row["r_teacher"]),
                         repr(row["train_loss"]), repr(row["val_loss"])])
        logf.flush()

    try:
        result = fit(model, dataset, cfg.train, augment=augment, log=log_row,
                     start_epoch=start_epoch, initial_val_history=initial_history)
        model.save(ckpt_path)
        if cfg.finetune_epochs > 0:
            n_fine = max(1, int(round(len(dataset) * cfg.finetune_fraction)))
            fine_cfg = cfg.train
            fine_cfg.epochs = cfg.train.epochs + cfg.finetune_epochs
            result = fit(model, dataset[:n_fine], fine_cfg, augment=augment,
                         log=log_row, start_epoch=cfg.train.epochs,
                         initial_val_history=[r["val_loss"] for r in result.history])
            model.save(ckpt_path)
        print(f"best validation loss {result.best_val_loss:.4f} "
              f"at epoch {result.best_epoch}; checkpoint at {ckpt_path}")
        return 0
    except TrainingDiverged:
        model.save(ckpt_path)  # fit restored the last good parameters
        raise
    finally:
        logf.close()


def cmd_localize(args) -> int:
    vel, _ = formats.load_velocity_csv(args.vel)
    gt = formats.load_trajectory_csv(args.gt) if args.gt else None
    if args.task != "localize" and gt is None:
        raise InvalidInputError(f"task {args.task} needs --gt for initialization")
    gmap = formats.load_map_pgm(args.map) if args.map else None
    model = TwoBranchLocalizer.load(args.checkpoint) if args.checkpoint else None
    runner = make_runner(args.method, gmap=gmap, model=model, seed=args.seed)
    if gt is None:
        # Uninitialized localization never reads the reference trajectory.
        gt = Trajectory(np.arange(2), np.zeros((2, 2)))
    pred = runner.predict(vel, gt, args.task)
    formats.save_trajectory_csv(pred, args.out)
    if args.likelihood_dir and isinstance(runner, ModelRunner):
        lik_dir = Path(args.likelihood_dir)
        lik_dir.mkdir(parents=True, exist_ok=True)
        result = runner.likelihoods(vel, gt, args.task)
        for frame, lmap in zip(result.frames, result.maps):
            formats.save_raster(lmap, lik_dir / f"frame_{int(frame):06d}.bin")
    print(f"wrote prediction to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    pred = formats.load_trajectory_csv(args.pred)
    gt = formats.load_trajectory_csv(args.gt)
    rep = metrics.evaluate(pred, gt, args.resolution)
    table = metrics.render_table({"prediction": rep})
    if args.out_json:
        with open(args.out_json, "w") as f:
            f.write(rep.to_json())
    if args.out_table:
        with open(args.out_table, "w") as f:
            f.write(table)
    print(rep.to_json())
    print(table, end="")
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    map_path = run_dir / "map.pgm"
    gt_path = run_dir / "gt.csv"
    if not map_path.exists() or not gt_path.exists():
        raise InvalidInputError(f"{run_dir} must contain map.pgm and gt.csv")
    preds = sorted(run_dir.glob("pred_*.csv"))
    if not preds:
        raise InvalidInputError("no pred_*.csv files in the run directory")
    gmap = formats.load_map_pgm(map_path)
    gt = formats.load_trajectory_csv(gt_path)
    entries = []
    for path in preds:
        traj = formats.load_trajectory_csv(path)
        sr = metrics.sr_distance(traj, gt, gmap.resolution)
        entries.append((path.stem.replace("pred_", ""), traj, sr))
    out = Path(args.out) if args.out else run_dir / "report.svg"
    report.save_report(out, gmap, gt, entries, title=run_dir.name)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inertloc",
        description="Inertial localization workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("derive-map", help="derive a walkable map from trajectories")
    p.add_argument("--traj-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resolution", type=float, required=True)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.set_defaults(func=cmd_derive_map)

    p = sub.add_parser("synthesize", help="generate synthetic trajectories")
    p.add_argument("--map", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--smoothing-s", type=float, default=5.0)
    p.add_argument("--noise-sigma", type=float, default=3.0)
    p.add_argument("--min-separation", type=float, default=20.0)
    p.add_argument("--max-nlls-iters", type=int, default=30)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("train", help="train the two-branch localizer")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("localize", help="run a localizer over a velocity CSV")
    p.add_argument("--method", required=True,
                   choices=["niloc", "velocity", "pf", "crf", "uniform"])
    p.add_argument("--vel", required=True)
    p.add_argument("--task", default="localize",
                   choices=["localize", "reloc_r2", "reloc_se2"])
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--map")
    p.add_argument("--gt")
    p.add_argument("--likelihood-dir")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("evaluate", help="score a prediction against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--resolution", type=float, required=True)
    p.add_argument("--out-json")
    p.add_argument("--out-table")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render an SVG overlay for a run directory")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInputError, ConfigError, WindowError, ShapeError,
            FileNotFoundError, OptimizationFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DegenerateDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except AlignmentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ALIGNMENT


if __name__ == "__main__":
    sys.exit(main())
