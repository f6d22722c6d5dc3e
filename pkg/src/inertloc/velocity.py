"""Velocity-sequence representation, distance-based resampling of raw streams,
and train-time augmentations (scale/gyro-bias perturbation, global rotation)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass
class VelocitySequence:
    """Ordered 2D velocity vectors, one per distance-resampled frame."""

    vectors: np.ndarray
    frame_origin: int = 0

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64).reshape(-1, 2)
        if not np.all(np.isfinite(self.vectors)):
            raise InvalidInputError("velocity components must be finite")

    def __len__(self):
        return self.vectors.shape[0]


@dataclass
class AugmentConfig:
    sigma_scale: float = 0.2
    sigma_bias: float = 0.05
    rotate: bool = True

    def __post_init__(self):
        if self.sigma_scale < 0 or self.sigma_bias < 0:
            raise InvalidInputError("augmentation sigmas must be nonnegative")


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def aggregate_by_distance(raw, pixel_distance: float) -> VelocitySequence:
    """Sum consecutive raw vectors, emitting each time the running sum's length
    strictly exceeds pixel_distance. A trailing sub-threshold remainder is
    dropped so every emitted vector spans about one pixel of travel.
    """
    if pixel_distance <= 0:
        raise InvalidInputError("pixel_distance must be positive")
    raw = np.asarray(raw, dtype=np.float64).reshape(-1, 2)
    out = []
    acc = np.zeros(2)
    for v in raw:
        acc = acc + v
        if np.hypot(acc[0], acc[1]) > pixel_distance:
            out.append(acc)
            acc = np.zeros(2)
    vectors = np.asarray(out).reshape(-1, 2)
    return VelocitySequence(vectors, frame_origin=0)


def apply_perturbation(seq: VelocitySequence, scale: float, bias: float) -> VelocitySequence:
    """Deterministic core of `perturb`: v'_t = scale * R(bias * t) v_t."""
    t = np.arange(len(seq), dtype=np.float64)
    angles = bias * t
    c, s = np.cos(angles), np.sin(angles)
    vx, vy = seq.vectors[:, 0], seq.vectors[:, 1]
    rotated = np.stack([c * vx - s * vy, s * vx + c * vy], axis=1)
    return VelocitySequence(scale * rotated, seq.frame_origin)


def perturb(seq: VelocitySequence, cfg: AugmentConfig,
            rng: np.random.Generator) -> VelocitySequence:
    """Per-sequence magnitude scale and cumulative gyro-bias rotation.

    scale ~ N(1, sigma_scale^2) redrawn until > 0.1; bias ~ N(0, sigma_bias^2)
    radians per frame, integrated linearly over the frame index.
    """
    scale = float(rng.normal(1.0, cfg.sigma_scale))
    while scale <= 0.1:
        scale = float(rng.normal(1.0, cfg.sigma_scale))
    bias = float(rng.normal(0.0, cfg.sigma_bias))
    return apply_perturbation(seq, scale, bias)


def random_rotation(seq: VelocitySequence, rng: np.random.Generator):
    """Rotate every vector by one uniform angle; returns (sequence, angle) so
    location labels can be counter-rotated when needed."""
    theta = float(rng.uniform(0.0, 2.0 * np.pi))
    rotated = seq.vectors @ rotation_matrix(theta).T
    return VelocitySequence(rotated, seq.frame_origin), theta
