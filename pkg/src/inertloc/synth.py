"""Synthetic trajectory generation: cubic smoothing splines fitted to shortest
paths, control-point refinement against the wall-penalty field, and noisy
constant-distance resampling into velocity sequences."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .errors import InvalidInputError, OptimizationFailure
from .gridworld import CostField, GridMap, Trajectory, sample_endpoints, shortest_path
from .velocity import VelocitySequence

DEGREE = 3


@dataclass
class SynthConfig:
    smoothing_s: float = 5.0
    map_weight: float = 1.0
    track_weight: float = 2.0
    sample_step: float = 1.0
    noise_sigma: float = 3.0
    max_nlls_iters: int = 30

    def __post_init__(self):
        if self.map_weight < 0 or self.track_weight < 0 or self.smoothing_s < 0:
            raise InvalidInputError("weights and smoothing must be nonnegative")
        if self.sample_step <= 0:
            raise InvalidInputError("sample_step must be positive")
        if self.max_nlls_iters < 1:
            raise InvalidInputError("max_nlls_iters must be >= 1")


@dataclass
class SplineCurve:
    """Cubic B-spline curve: clamped knot vector plus 2D control points."""

    knots: np.ndarray
    control_points: np.ndarray
    degree: int = DEGREE

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=np.float64)
        self.control_points = np.asarray(self.control_points, dtype=np.float64)
        if self.degree != DEGREE:
            raise InvalidInputError("only cubic curves are supported")
        if len(self.knots) != len(self.control_points) + self.degree + 1:
            raise InvalidInputError("knot count must equal control count + degree + 1")
        if np.any(np.diff(self.knots) < 0):
            raise InvalidInputError("knots must be nondecreasing")

    @property
    def domain(self):
        return float(self.knots[self.degree]), float(self.knots[-self.degree - 1])

    def _bspline(self) -> BSpline:
        return BSpline(self.knots, self.control_points, self.degree, extrapolate=False)

    def derivative(self) -> BSpline:
        return self._bspline().derivative()


def chord_parameters(xy: np.ndarray) -> np.ndarray:
    """Cumulative chord-length parameterization of a point sequence."""
    xy = np.asarray(xy, dtype=np.float64)
    seg = np.hypot(*(np.diff(xy, axis=0).T))
    return np.concatenate([[0.0], np.cumsum(seg)])


def eval_spline(curve: SplineCurve, t) -> np.ndarray:
    """De Boor evaluation at parameter(s) t inside the curve domain."""
    lo, hi = curve.domain
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < lo - 1e-9) or np.any(t_arr > hi + 1e-9):
        raise ValueError(f"parameter outside spline domain [{lo}, {hi}]")
    out = curve._bspline()(np.clip(t_arr, lo, hi))
    return out


def design_matrix(curve_knots: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Dense basis-function matrix N with B(u) = N @ control_points."""
    lo = curve_knots[DEGREE]
    hi = curve_knots[-DEGREE - 1]
    u = np.clip(np.asarray(u, dtype=np.float64), lo, hi)
    return BSpline.design_matrix(u, curve_knots, DEGREE).toarray()


def _clamped_knots(lo: float, hi: float, interior) -> np.ndarray:
    return np.concatenate([[lo] * (DEGREE + 1), np.sort(np.asarray(interior)),
                           [hi] * (DEGREE + 1)])


def _lsq_fit(knots: np.ndarray, u: np.ndarray, xy: np.ndarray):
    n = design_matrix(knots, u)
    ctrl, *_ = np.linalg.lstsq(n, xy, rcond=None)
    resid = n @ ctrl - xy
    return ctrl, float(np.sum(resid * resid)), resid


def fit_smoothing_spline(traj: Trajectory, s: float = 5.0) -> SplineCurve:
    """Cubic smoothing spline over cumulative chord length.

    Starts from a single-span cubic and greedily inserts interior knots at the
    parameter of the worst residual until the sum of squared residuals drops
    to s or no insertable parameters remain.
    """
    if s < 0:
        raise InvalidInputError("smoothing s must be nonnegative")
    xy = np.asarray(traj.xy, dtype=np.float64)
    if len(xy) < 4:
        raise InvalidInputError("need at least 4 samples to fit a cubic curve")
    u = chord_parameters(xy)
    if u[-1] <= 0:
        raise InvalidInputError("degenerate trajectory with zero length")
    candidates = sorted(set(np.unique(u[1:-1]).tolist()) - {u[0], u[-1]})
    interior: list[float] = []
    knots = _clamped_knots(u[0], u[-1], interior)
    ctrl, ssr, resid = _lsq_fit(knots, u, xy)
    while ssr > s + 1e-12 and candidates:
        errs = np.sum(resid * resid, axis=1)
        for idx in np.argsort(-errs):
            cand = float(u[idx])
            if cand in candidates:
                candidates.remove(cand)
                interior.append(cand)
                break
        else:
            break
        knots = _clamped_knots(u[0], u[-1], interior)
        ctrl, ssr, resid = _lsq_fit(knots, u, xy)
    return SplineCurve(knots, ctrl)


@dataclass
class LMResult:
    x: np.ndarray
    energy_history: list
    accepted_steps: int
    iterations: int


def levenberg_marquardt(residual_fn, x0, energy_fn=None, max_iters=30,
                        lam0=1e-3, lam_up=10.0, lam_down=0.3, h=1e-4,
                        step_tol=1e-10) -> LMResult:
    """Damped least squares with central-difference numerical Jacobians.

    energy_fn defaults to sum(r^2); steps are accepted only when the energy
    does not increase, so the recorded energy history is monotone.
    """
    x = np.array(x0, dtype=np.float64)
    if energy_fn is None:
        energy_fn = lambda z: float(np.sum(residual_fn(z) ** 2))
    energy = energy_fn(x)
    if not math.isfinite(energy):
        raise OptimizationFailure("initial energy is not finite", last_iterate=x)
    history = [energy]
    lam = lam0
    accepted = 0
    iterations = 0
    for _ in range(max_iters):
        iterations += 1
        r = residual_fn(x)
        if not np.all(np.isfinite(r)):
            raise OptimizationFailure("non-finite residuals", last_iterate=x)
        jac = np.empty((len(r), len(x)))
        for j in range(len(x)):
            e = np.zeros_like(x)
            e[j] = h
            jac[:, j] = (residual_fn(x + e) - residual_fn(x - e)) / (2.0 * h)
        if not np.all(np.isfinite(jac)):
            raise OptimizationFailure("non-finite Jacobian", last_iterate=x)
        g = jac.T @ r
        jtj = jac.T @ jac
        moved = False
        for _ in range(8):
            try:
                delta = np.linalg.solve(jtj + lam * np.eye(len(x)), -g)
            except np.linalg.LinAlgError:
                delta = np.linalg.lstsq(jtj + lam * np.eye(len(x)), -g, rcond=None)[0]
            cand = x + delta
            cand_energy = energy_fn(cand)
            if not math.isfinite(cand_energy):
                raise OptimizationFailure("non-finite energy during iteration",
                                          last_iterate=x)
            if cand_energy <= energy:
                x = cand
                moved = float(np.max(np.abs(delta))) > step_tol
                energy = cand_energy
                history.append(energy)
                accepted += 1
                lam = max(lam * lam_down, 1e-12)
                break
            lam *= lam_up
        else:
            break
        if not moved:
            break
    return LMResult(x, history, accepted, iterations)


@dataclass
class OptimizeInfo:
    energy_history: list
    initial_energy: float
    final_energy: float


def curve_energy(curve: SplineCurve, fieldmap: CostField, anchor: Trajectory,
                 cfg: SynthConfig) -> float:
    """Wall penalty plus anchor-distance energy evaluated at anchor parameters."""
    u = chord_parameters(anchor.xy)
    n = design_matrix(curve.knots, u)
    pts = n @ curve.control_points
    dists = np.hypot(*(pts - anchor.xy).T)
    return float(cfg.map_weight * np.sum(fieldmap.sample_bilinear(pts))
                 + cfg.track_weight * np.sum(dists))


def optimize_control_points(curve: SplineCurve, fieldmap: CostField,
                            anchor: Trajectory, cfg: SynthConfig):
    """Move control points to minimize wall penalty plus anchor deviation.

    The energy sum_t [w_map * f(B(t)) + w_track * ||B(t) - p_t||] is expressed
    as a sum of squared residuals (sqrt of each term) and minimized with
    damped least squares. Returns (curve, OptimizeInfo) with a non-increasing
    energy history.
    """
    u = chord_parameters(anchor.xy)
    nmat = design_matrix(curve.knots, u)
    target = anchor.xy
    shape = curve.control_points.shape

    def points_of(x):
        return nmat @ x.reshape(shape)

    def residuals(x):
        pts = points_of(x)
        fvals = np.maximum(fieldmap.sample_bilinear(pts), 0.0)
        dists = np.hypot(*(pts - target).T)
        return np.concatenate([np.sqrt(cfg.map_weight * fvals + 1e-12),
                               np.sqrt(cfg.track_weight * dists + 1e-12)])

    def energy(x):
        pts = points_of(x)
        dists = np.hypot(*(pts - target).T)
        return float(cfg.map_weight * np.sum(fieldmap.sample_bilinear(pts))
                     + cfg.track_weight * np.sum(dists))

    try:
        result = levenberg_marquardt(residuals, curve.control_points.ravel(),
                                     energy_fn=energy, max_iters=cfg.max_nlls_iters)
    except OptimizationFailure as exc:
        exc.last_iterate = SplineCurve(curve.knots,
                                       np.asarray(exc.last_iterate).reshape(shape))
        raise
    new_curve = SplineCurve(curve.knots.copy(), result.x.reshape(shape))
    info = OptimizeInfo(result.energy_history, result.energy_history[0],
                        result.energy_history[-1])
    return new_curve, info


def arc_length_table(curve: SplineCurve, subdivisions: int = 10):
    """Trapezoidal cumulative arc length over each knot span.

    Returns (params, cumulative_length) with `subdivisions` intervals per
    distinct knot span.
    """
    lo, hi = curve.domain
    spans = np.unique(curve.knots[(curve.knots >= lo) & (curve.knots <= hi)])
    params = [np.array([lo])]
    for a, b in zip(spans[:-1], spans[1:]):
        params.append(np.linspace(a, b, subdivisions + 1)[1:])
    u = np.concatenate(params)
    speed = np.hypot(*curve.derivative()(u).T)
    seg = 0.5 * (speed[1:] + speed[:-1]) * np.diff(u)
    return u, np.concatenate([[0.0], np.cumsum(seg)])


def arc_length(curve: SplineCurve) -> float:
    return float(arc_length_table(curve)[1][-1])


def resample_constant_distance(curve: SplineCurve, cfg: SynthConfig,
                               rng: np.random.Generator):
    """Sample the curve so consecutive samples are sample_step apart.

    Returns (gt, vel): gt is the noise-free Trajectory; vel holds consecutive
    differences of samples perturbed by iid Gaussian position noise with
    cfg.noise_sigma, mimicking inertial measurement error while keeping labels
    clean.
    """
    u_tab, len_tab = arc_length_table(curve)
    total = len_tab[-1]
    step = cfg.sample_step
    if total < 2.0 * step:
        raise InvalidInputError("curve arc length too short to resample")
    bsp = curve._bspline()
    pts_tab = bsp(u_tab)
    samples = [pts_tab[0]]
    params = [u_tab[0]]
    k = 1
    tol = 1e-4
    while True:
        prev = samples[-1]
        # Advance over table nodes until the chord from the previous sample
        # reaches the step, then bisect inside the bracketing interval.
        while k < len(u_tab) and np.hypot(*(pts_tab[k] - prev)) < step:
            k += 1
        if k >= len(u_tab):
            break
        a = max(params[-1], u_tab[k - 1])
        b = u_tab[k]
        for _ in range(60):
            mid = 0.5 * (a + b)
            d = np.hypot(*(np.asarray(bsp(mid)) - prev))
            if abs(d - step) <= tol:
                a = b = mid
                break
            if d < step:
                a = mid
            else:
                b = mid
        u_next = 0.5 * (a + b)
        params.append(u_next)
        samples.append(np.asarray(bsp(u_next)))
    if len(samples) < 2:
        raise InvalidInputError("curve produced fewer than two samples")
    gt_xy = np.asarray(samples)
    noisy = gt_xy + rng.normal(0.0, cfg.noise_sigma, size=gt_xy.shape)
    vel = np.diff(noisy, axis=0)
    gt = Trajectory(np.arange(len(gt_xy)), gt_xy)
    return gt, VelocitySequence(vel, frame_origin=0)


@dataclass
class SynthResult:
    gt: Trajectory
    vel: VelocitySequence
    raw_path: Trajectory
    curve: SplineCurve
    opt_info: OptimizeInfo
    endpoints: tuple

    def __iter__(self):
        return iter((self.gt, self.vel))


def synthesize_trajectory(gmap: GridMap, fieldmap: CostField, cfg: SynthConfig,
                          rng: np.random.Generator, min_separation: float = 20.0,
                          max_retries: int = 10) -> SynthResult:
    """Full synthesis: endpoints -> shortest path -> smoothing spline ->
    field refinement -> noisy constant-distance resample.

    Deterministic given the generator state; retries endpoint sampling when a
    drawn pair yields no usable path.
    """
    path = None
    endpoints = None
    for _ in range(max_retries):
        endpoints = sample_endpoints(gmap, rng, min_separation)
        path = shortest_path(gmap, *endpoints)
        if path is not None and len(path) >= 4:
            break
        path = None
    if path is None:
        raise InvalidInputError("could not sample a usable path")
    curve = fit_smoothing_spline(path, cfg.smoothing_s)
    curve, info = optimize_control_points(curve, fieldmap, path, cfg)
    gt, vel = resample_constant_distance(curve, cfg, rng)
    return SynthResult(gt, vel, path, curve, info, endpoints)


def trajectory_to_velocity(traj: Trajectory, s: float = 5.0, step: float = 1.0):
    """Smooth a measured trajectory and extract noise-free velocity vectors.

    The same smoothing applied to synthetic paths is applied here so measured
    and synthetic inputs share the same statistics.
    """
    curve = fit_smoothing_spline(traj, s)
    cfg = SynthConfig(smoothing_s=s, sample_step=step, noise_sigma=0.0)
    return resample_constant_distance(curve, cfg, np.random.default_rng(0))


def sample_rng(root_seed: int, index: int) -> np.random.Generator:
    """Counter-based per-sample stream: generator index `index` under a root seed."""
    return np.random.default_rng(np.random.SeedSequence([int(root_seed), int(index)]))
