"""Inertial localization workbench.

Builds walkable-region worlds, synthesizes floorplan-constrained trajectories,
trains a two-branch velocity-to-likelihood localizer on a small reverse-mode
tensor core, and benchmarks it against particle-filter and Viterbi
map-matching baselines under success-rate metrics.
"""

from . import baselines, formats, gridworld, metrics, model, nn, runners, synth, velocity
from .errors import (AlignmentError, ConfigError, DegenerateDataError,
                     InvalidInputError, OptimizationFailure, ShapeError,
                     TrainingDiverged, WindowError)
from .gridworld import (CostField, GridMap, Trajectory, derive_walkable,
                        distance_cost_field, rotate_map, sample_endpoints,
                        shortest_path)
from .model import (ModelConfig, TrainConfig, TwoBranchLocalizer,
                    autoregressive_infer, fit, positional_encoding,
                    teacher_ratio, velocity_branch_infer)
from .synth import (SplineCurve, SynthConfig, eval_spline, fit_smoothing_spline,
                    optimize_control_points, resample_constant_distance,
                    synthesize_trajectory)
from .velocity import (AugmentConfig, VelocitySequence, aggregate_by_distance,
                       perturb, random_rotation)

__version__ = "0.1.0"
