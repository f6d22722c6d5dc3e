"""Experiment configuration: flat key=value sections parsed from an INI-style file."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .model import ModelConfig, TrainConfig
from .synth import SynthConfig
from .velocity import AugmentConfig


@dataclass
class ExperimentConfig:
    seed: int = 0
    output: str = "runs/default"
    map_path: str = ""
    dataset_dir: str = ""
    synth_count: int = 100
    min_separation: float = 20.0
    synth: SynthConfig = field(default_factory=SynthConfig)
    augment: AugmentConfig = field(default_factory=lambda: AugmentConfig(rotate=False))
    use_augment: bool = False
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    finetune_epochs: int = 0
    finetune_fraction: float = 0.2


def _take(section, target, key, cast):
    if section is not None and key in section:
        setattr(target, key, cast(section[key]))


def load_experiment(path) -> ExperimentConfig:
    """Parse an experiment file; unknown keys raise so typos surface early."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    parser = configparser.ConfigParser()
    parser.read(path)
    cfg = ExperimentConfig()

    known = {
        "experiment": {"seed": int, "output": str},
        "map": {"path": str},
        "data": {"dir": str, "count": int, "min_separation": float},
        "synth": {"smoothing_s": float, "map_weight": float, "track_weight": float,
                  "sample_step": float, "noise_sigma": float, "max_nlls_iters": int},
        "augment": {"sigma_scale": float, "sigma_bias": float, "rotate": None,
                    "enabled": None},
        "model": {"d": int, "width": int, "height": int, "compress": int,
                  "enc_blocks": int, "layers_per_block": int, "heads": int,
                  "loc_history": int, "ffn_mult": int},
        "train": {"epochs": int, "batch": int, "window_tokens": int, "seed": int,
                  "base_lr": float, "warmup": int, "plateau_patience": int,
                  "lr_factor": float, "weight_decay": float,
                  "steps_per_epoch": int, "val_fraction": float,
                  "finetune_epochs": int, "finetune_fraction": float},
    }
    for name in parser.sections():
        if name not in known:
            raise ConfigError(f"unknown config section [{name}]")
        for key in parser[name]:
            if key not in known[name]:
                raise ConfigError(f"unknown key {key!r} in section [{name}]")

    sec = parser["experiment"] if "experiment" in parser else None
    if sec is not None:
        cfg.seed = sec.getint("seed", cfg.seed)
        cfg.output = sec.get("output", cfg.output)
    if "map" in parser:
        cfg.map_path = parser["map"].get("path", cfg.map_path)
    if "data" in parser:
        sec = parser["data"]
        cfg.dataset_dir = sec.get("dir", cfg.dataset_dir)
        cfg.synth_count = sec.getint("count", cfg.synth_count)
        cfg.min_separation = sec.getfloat("min_separation", cfg.min_separation)
    sec = parser["synth"] if "synth" in parser else None
    for key, cast in known["synth"].items():
        _take(sec, cfg.synth, key, cast)
    if "augment" in parser:
        sec = parser["augment"]
        cfg.augment.sigma_scale = sec.getfloat("sigma_scale", cfg.augment.sigma_scale)
        cfg.augment.sigma_bias = sec.getfloat("sigma_bias", cfg.augment.sigma_bias)
        cfg.augment.rotate = sec.getboolean("rotate", cfg.augment.rotate)
        cfg.use_augment = sec.getboolean("enabled", cfg.use_augment)
    if "model" in parser:
        sec = parser["model"]
        kwargs = {key: cast(sec[key]) for key, cast in known["model"].items()
                  if key in sec}
        base = ModelConfig(**kwargs)
        cfg.model = base
    if "train" in parser:
        sec = parser["train"]
        for key, cast in known["train"].items():
            if key in ("finetune_epochs", "finetune_fraction"):
                continue
            _take(sec, cfg.train, key, cast)
        cfg.finetune_epochs = sec.getint("finetune_epochs", cfg.finetune_epochs)
        cfg.finetune_fraction = sec.getfloat("finetune_fraction",
                                             cfg.finetune_fraction)
    return cfg
