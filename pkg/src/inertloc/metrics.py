"""Success-rate metrics and the localization / re-localization task protocols."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, ConfigError
from .gridworld import Trajectory

DISTANCE_THRESHOLDS_M = (1.0, 2.0, 4.0, 6.0)
ANGLE_THRESHOLDS_DEG = (20.0, 40.0)
TASKS = ("localize", "reloc_r2", "reloc_se2")


def align(pred: Trajectory, gt: Trajectory):
    """Linearly interpolate the prediction onto the ground-truth frames.

    Only ground-truth frames inside the prediction's time span are evaluable;
    raises AlignmentError when the overlap is empty.
    """
    lo, hi = pred.t[0], pred.t[-1]
    mask = (gt.t >= lo) & (gt.t <= hi)
    if not np.any(mask):
        raise AlignmentError("prediction and ground truth share no frames")
    frames = gt.t[mask]
    px = np.interp(frames, pred.t, pred.xy[:, 0])
    py = np.interp(frames, pred.t, pred.xy[:, 1])
    return frames, np.stack([px, py], axis=1), gt.xy[mask]


def sr_distance(pred: Trajectory, gt: Trajectory, resolution: float,
                thresholds=DISTANCE_THRESHOLDS_M):
    """Percentage of frames within each distance threshold (meters)."""
    _, pxy, gxy = align(pred, gt)
    dists = np.hypot(*(pxy - gxy).T)
    return {float(tau): 100.0 * float(np.mean(dists <= tau * resolution))
            for tau in thresholds}


def sr_angle(pred: Trajectory, gt: Trajectory, thresholds=ANGLE_THRESHOLDS_DEG,
             min_speed: float = 0.5):
    """Percentage of frames whose motion direction is within each threshold.

    Directions come from consecutive aligned positions; frames where the
    ground truth moves less than min_speed pixels are skipped. Returns NaN
    percentages when no frame moves fast enough (undefined, not an error).
    """
    _, pxy, gxy = align(pred, gt)
    gdisp = np.diff(gxy, axis=0)
    pdisp = np.diff(pxy, axis=0)
    moving = np.hypot(*gdisp.T) >= min_speed
    if not np.any(moving):
        return {float(tau): math.nan for tau in thresholds}, 0
    ga = np.arctan2(gdisp[moving, 1], gdisp[moving, 0])
    pa = np.arctan2(pdisp[moving, 1], pdisp[moving, 0])
    diff = np.abs(np.angle(np.exp(1j * (pa - ga))))
    deg = np.degrees(diff)
    return ({float(tau): 100.0 * float(np.mean(deg <= tau)) for tau in thresholds},
            int(np.count_nonzero(moving)))


@dataclass
class MetricReport:
    sr_distance: dict
    sr_angle: dict
    frames_evaluated: int
    angle_frames: int = 0
    runtime_sec_per_motion_min: float | None = None

    def to_dict(self) -> dict:
        return {
            "sr_distance": {f"{k:g}m": v for k, v in self.sr_distance.items()},
            "sr_angle": {f"{k:g}deg": (None if math.isnan(v) else v)
                         for k, v in self.sr_angle.items()},
            "frames_evaluated": self.frames_evaluated,
            "angle_frames": self.angle_frames,
            "runtime_sec_per_motion_min": self.runtime_sec_per_motion_min,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def evaluate(pred: Trajectory, gt: Trajectory, resolution: float) -> MetricReport:
    dist = sr_distance(pred, gt, resolution)
    ang, ang_frames = sr_angle(pred, gt)
    frames = align(pred, gt)[0]
    return MetricReport(dist, ang, len(frames), ang_frames)


def render_table(reports: dict) -> str:
    """Aligned plain-text table: one row per method, SR columns plus runtime."""
    dist_taus = sorted({tau for r in reports.values() for tau in r.sr_distance})
    ang_taus = sorted({tau for r in reports.values() for tau in r.sr_angle})
    header = (["method"] + [f"SR@{tau:g}m" for tau in dist_taus]
              + [f"SR@{tau:g}deg" for tau in ang_taus] + ["sec/min"])
    rows = [header]
    for name, rep in reports.items():
        cells = [name]
        cells += [f"{rep.sr_distance.get(tau, math.nan):.1f}" for tau in dist_taus]
        cells += ["n/a" if math.isnan(rep.sr_angle.get(tau, math.nan))
                  else f"{rep.sr_angle[tau]:.1f}" for tau in ang_taus]
        rt = rep.runtime_sec_per_motion_min
        cells.append("n/a" if rt is None else f"{rt:.3f}")
        rows.append(cells)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(row, widths))
             for row in rows]
    return "\n".join(lines) + "\n"


def run_task(task: str, runner, vel: np.ndarray, gt: Trajectory,
             resolution: float, nominal_speed_mps: float = 1.4) -> MetricReport:
    """Run one localization task protocol and score the prediction.

    The runner receives only the initialization the task permits (nothing,
    the first frame, or the first two frames) and must return a Trajectory on
    ground-truth frame indexing. Runtime is normalized per minute of motion
    assuming a nominal walking speed.
    """
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; expected one of {TASKS}")
    start = time.perf_counter()
    pred = runner.predict(np.asarray(vel, dtype=np.float64), gt, task)
    elapsed = max(time.perf_counter() - start, 1e-9)
    motion_minutes = len(vel) / resolution / nominal_speed_mps / 60.0
    report = evaluate(pred, gt, resolution)
    report.runtime_sec_per_motion_min = elapsed / max(motion_minutes, 1e-9)
    return report
