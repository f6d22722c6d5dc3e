"""Task-protocol adapters wiring each localization method into run_task."""

from __future__ import annotations

import math

import numpy as np

from .baselines import CRFConfig, PFConfig, PFInit, crf_build, crf_localize, pf_run
from .errors import ConfigError
from .gridworld import GridMap, Trajectory
from .model import (TwoBranchLocalizer, autoregressive_infer, one_hot_map,
                    velocity_branch_infer)


class ModelRunner:
    """Learned localizer; `branch` selects the autoregressive roll or the
    velocity branch alone (the latter cannot use re-localization hints)."""

    def __init__(self, model: TwoBranchLocalizer, branch: str = "location"):
        self.model = model
        self.branch = branch

    def predict(self, vel: np.ndarray, gt: Trajectory, task: str) -> Trajectory:
        cfg = self.model.cfg
        if self.branch == "velocity":
            return velocity_branch_infer(self.model, vel).trajectory
        if task == "localize":
            init = None
        elif task == "reloc_r2":
            init = [one_hot_map(gt.xy[0], cfg.height, cfg.width)]
        elif task == "reloc_se2":
            second = min(cfg.compress, len(gt) - 1)
            init = [one_hot_map(gt.xy[0], cfg.height, cfg.width),
                    one_hot_map(gt.xy[second], cfg.height, cfg.width)]
        else:
            raise ConfigError(f"unknown task {task!r}")
        return autoregressive_infer(self.model, vel, init).trajectory

    def likelihoods(self, vel: np.ndarray, gt: Trajectory, task: str):
        if task == "localize":
            init = None
        elif task == "reloc_r2":
            init = [one_hot_map(gt.xy[0], self.model.cfg.height, self.model.cfg.width)]
        else:
            second = min(self.model.cfg.compress, len(gt) - 1)
            init = [one_hot_map(gt.xy[0], self.model.cfg.height, self.model.cfg.width),
                    one_hot_map(gt.xy[second], self.model.cfg.height,
                                self.model.cfg.width)]
        return autoregressive_infer(self.model, vel, init)


class ParticleFilterRunner:
    def __init__(self, gmap: GridMap, cfg: PFConfig | None = None, seed: int = 0,
                 init_sigma_pos: float = 1.0, init_sigma_heading: float = 0.1):
        self.gmap = gmap
        self.cfg = cfg or PFConfig()
        self.seed = seed
        self.init_sigma_pos = init_sigma_pos
        self.init_sigma_heading = init_sigma_heading

    def predict(self, vel: np.ndarray, gt: Trajectory, task: str) -> Trajectory:
        rng = np.random.default_rng(self.seed)
        if task == "localize":
            init = PFInit(mode="uniform")
        elif task == "reloc_r2":
            init = PFInit(mode="gaussian", x=gt.xy[0, 0], y=gt.xy[0, 1],
                          sigma_pos=self.init_sigma_pos)
        elif task == "reloc_se2":
            step = gt.xy[min(1, len(gt) - 1)] - gt.xy[0]
            init = PFInit(mode="gaussian", x=gt.xy[0, 0], y=gt.xy[0, 1],
                          sigma_pos=self.init_sigma_pos,
                          heading=math.atan2(step[1], step[0]),
                          sigma_heading=self.init_sigma_heading)
        else:
            raise ConfigError(f"unknown task {task!r}")
        return pf_run(self.gmap, vel, init, rng, self.cfg)


class CRFRunner:
    def __init__(self, gmap: GridMap, cfg: CRFConfig | None = None,
                 window: int | None = 100):
        self.gmap = gmap
        self.cfg = cfg or CRFConfig()
        self.graph = crf_build(gmap, heading_bins=self.cfg.heading_bins)
        self.window = window

    def predict(self, vel: np.ndarray, gt: Trajectory, task: str) -> Trajectory:
        if task == "localize":
            init = None
        else:
            x0, y0 = int(round(gt.xy[0, 0])), int(round(gt.xy[0, 1]))
            if task == "reloc_r2":
                init = (x0, y0)
            elif task == "reloc_se2":
                true_step = gt.xy[min(1, len(gt) - 1)] - gt.xy[0]
                obs = vel[0]
                theta = (math.atan2(true_step[1], true_step[0])
                         - math.atan2(obs[1], obs[0]))
                nbins = self.graph.heading_bins
                b = int(round(theta / (2.0 * math.pi / nbins))) % nbins
                init = (x0, y0, b)
            else:
                raise ConfigError(f"unknown task {task!r}")
        result = crf_localize(self.graph, vel, init=init, window=self.window,
                              cfg=self.cfg)
        return result.trajectory


class UniformStubRunner:
    """Degenerate reference: always predicts the argmax of a uniform likelihood
    over walkable pixels (deterministically the first in scan order)."""

    def __init__(self, gmap: GridMap):
        ys, xs = np.nonzero(gmap.walkable)
        if len(ys) == 0:
            raise ConfigError("map has no walkable pixels")
        self.pixel = (float(xs[0]), float(ys[0]))

    def predict(self, vel: np.ndarray, gt: Trajectory, task: str) -> Trajectory:
        xy = np.tile(self.pixel, (len(gt), 1))
        return Trajectory(gt.t.copy(), xy)


def make_runner(method: str, gmap: GridMap | None = None,
                model: TwoBranchLocalizer | None = None, seed: int = 0):
    """CLI-facing factory; validates that map-based methods received a map."""
    method = method.lower()
    if method in ("model", "niloc", "location"):
        if model is None:
            raise ConfigError("learned method needs a checkpoint")
        return ModelRunner(model)
    if method == "velocity":
        if model is None:
            raise ConfigError("learned method needs a checkpoint")
        return ModelRunner(model, branch="velocity")
    if method == "pf":
        if gmap is None:
            raise ConfigError("particle filter needs a map")
        return ParticleFilterRunner(gmap, seed=seed)
    if method == "crf":
        if gmap is None:
            raise ConfigError("map matcher needs a map")
        return CRFRunner(gmap)
    if method == "uniform":
        if gmap is None:
            raise ConfigError("uniform stub needs a map")
        return UniformStubRunner(gmap)
    raise ConfigError(f"unknown method {method!r}")
