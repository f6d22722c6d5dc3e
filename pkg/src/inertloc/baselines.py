"""Floorplan-assisted classical localizers: a particle filter and a windowed
Viterbi map matcher over a reach-ability graph, both consuming the same
distance-resampled velocity input as the learned model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError, InvalidInputError
from .gridworld import GridMap, NeighborSystem, Trajectory

NEG_INF = -np.inf


def wrap_angle(theta):
    """Wrap to (-pi, pi]."""
    return math.pi - (math.pi - np.asarray(theta)) % (2.0 * math.pi)


# ---------------------------------------------------------------------------
# Particle filter


@dataclass
class PFConfig:
    n_particles: int = 1000
    process_noise: float = 0.2       # px per axis per step
    offmap_weight: float = 0.01
    scale_sigma: float = 0.1
    bias_sigma: float = 0.01
    resample_fraction: float = 0.5   # resample when ESS < fraction * N


@dataclass
class PFInit:
    mode: str = "uniform"            # "uniform" or "gaussian"
    x: float = 0.0
    y: float = 0.0
    sigma_pos: float = 1.0
    heading: float | None = None     # None: uniform heading
    sigma_heading: float = 0.1


@dataclass
class Population:
    xy: np.ndarray
    heading: np.ndarray
    scale: np.ndarray
    bias: np.ndarray
    weights: np.ndarray
    prev_angle: float | None = None
    divergence_events: int = 0

    def __len__(self):
        return self.xy.shape[0]

    def ess(self) -> float:
        return 1.0 / float(np.sum(self.weights ** 2))


def _uniform_positions(gmap: GridMap, n: int, rng: np.random.Generator) -> np.ndarray:
    pixels = gmap.walkable_pixels()
    if len(pixels) == 0:
        raise DegenerateDataError("map has no walkable pixels")
    idx = rng.integers(len(pixels), size=n)
    return pixels[idx].astype(np.float64)


def pf_init(gmap: GridMap, init: PFInit, rng: np.random.Generator,
            cfg: PFConfig | None = None) -> Population:
    """Spawn a particle population per the initialization mode.

    Gaussian positions are rejection-sampled onto walkable pixels (sigma 0
    pins all particles to the given point); uniform headings otherwise.
    """
    cfg = cfg or PFConfig()
    n = cfg.n_particles
    if n < 1:
        raise InvalidInputError("need at least one particle")
    if init.mode == "uniform":
        xy = _uniform_positions(gmap, n, rng)
        heading = rng.uniform(0.0, 2.0 * math.pi, size=n)
    elif init.mode == "gaussian":
        if init.sigma_pos == 0.0:
            xy = np.tile([init.x, init.y], (n, 1)).astype(np.float64)
        else:
            xy = np.empty((n, 2))
            for i in range(n):
                for _ in range(10000):
                    cand = rng.normal([init.x, init.y], init.sigma_pos)
                    if gmap.is_walkable(int(round(cand[0])), int(round(cand[1]))):
                        xy[i] = cand
                        break
                else:
                    raise DegenerateDataError("could not place particle on walkable area")
        if init.heading is None:
            heading = rng.uniform(0.0, 2.0 * math.pi, size=n)
        else:
            heading = rng.normal(init.heading, init.sigma_heading, size=n)
    else:
        raise InvalidInputError(f"unknown init mode {init.mode!r}")
    scale = rng.normal(1.0, cfg.scale_sigma, size=n)
    bias = rng.normal(0.0, cfg.bias_sigma, size=n)
    weights = np.full(n, 1.0 / n)
    return Population(xy, heading, scale, bias, weights)


def _systematic_resample(pop: Population, rng: np.random.Generator):
    n = len(pop)
    positions = (rng.uniform(0.0, 1.0) + np.arange(n)) / n
    idx = np.searchsorted(np.cumsum(pop.weights), positions)
    idx = np.clip(idx, 0, n - 1)
    pop.xy = pop.xy[idx].copy()
    pop.heading = pop.heading[idx].copy()
    pop.scale = pop.scale[idx].copy()
    pop.bias = pop.bias[idx].copy()
    pop.weights = np.full(n, 1.0 / n)


def pf_step(pop: Population, v, gmap: GridMap, rng: np.random.Generator,
            cfg: PFConfig | None = None) -> Population:
    """Propagate particles by one observed velocity and reweigh by walkability.

    Heading advances by the observed turn plus each particle's gyro-bias
    correction; displacement is the particle-scaled speed along its heading
    plus Gaussian process noise. Particles landing off the walkable region are
    down-weighted, then the population renormalizes and resamples on low ESS.
    """
    cfg = cfg or PFConfig()
    if len(pop) == 0:
        raise InvalidInputError("empty population")
    v = np.asarray(v, dtype=np.float64)
    speed = float(np.hypot(v[0], v[1]))
    if speed > 0.0:
        obs_angle = math.atan2(v[1], v[0])
        turn = 0.0 if pop.prev_angle is None \
            else float(wrap_angle(obs_angle - pop.prev_angle))
        pop.prev_angle = obs_angle
    else:
        turn = 0.0
    pop.heading = pop.heading + turn + pop.bias
    step = pop.scale * speed
    pop.xy = pop.xy + np.stack([step * np.cos(pop.heading),
                                step * np.sin(pop.heading)], axis=1)
    if cfg.process_noise > 0.0:
        pop.xy = pop.xy + rng.normal(0.0, cfg.process_noise, size=pop.xy.shape)
    xi = np.rint(pop.xy[:, 0]).astype(int)
    yi = np.rint(pop.xy[:, 1]).astype(int)
    inside = (xi >= 0) & (xi < gmap.width) & (yi >= 0) & (yi < gmap.height)
    on_map = np.zeros(len(pop), dtype=bool)
    on_map[inside] = gmap.walkable[yi[inside], xi[inside]]
    pop.weights = pop.weights * np.where(on_map, 1.0, cfg.offmap_weight)
    total = float(pop.weights.sum())
    if not math.isfinite(total) or total <= 0.0:
        fresh = pf_init(gmap, PFInit(mode="uniform"), rng,
                        PFConfig(n_particles=len(pop), scale_sigma=cfg.scale_sigma,
                                 bias_sigma=cfg.bias_sigma))
        pop.xy, pop.heading = fresh.xy, fresh.heading
        pop.scale, pop.bias = fresh.scale, fresh.bias
        pop.weights = fresh.weights
        pop.divergence_events += 1
        return pop
    pop.weights = pop.weights / total
    if pop.ess() < cfg.resample_fraction * len(pop):
        _systematic_resample(pop, rng)
    return pop


def weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    """Smallest value whose cumulative weight reaches one half."""
    order = np.argsort(values)
    cum = np.cumsum(weights[order])
    k = int(np.searchsorted(cum, 0.5 * cum[-1]))
    return float(values[order][min(k, len(values) - 1)])


def pf_estimate(pop: Population) -> np.ndarray:
    """Position of the particle closest to the per-axis weighted median."""
    if len(pop) == 0:
        raise InvalidInputError("empty population")
    mx = weighted_median(pop.xy[:, 0], pop.weights)
    my = weighted_median(pop.xy[:, 1], pop.weights)
    d2 = (pop.xy[:, 0] - mx) ** 2 + (pop.xy[:, 1] - my) ** 2
    return pop.xy[int(np.argmin(d2))].copy()


def pf_run(gmap: GridMap, vectors: np.ndarray, init: PFInit,
           rng: np.random.Generator, cfg: PFConfig | None = None) -> Trajectory:
    """Filter a whole velocity sequence; one estimate per frame from t=0."""
    cfg = cfg or PFConfig()
    pop = pf_init(gmap, init, rng, cfg)
    estimates = [pf_estimate(pop)]
    for v in np.asarray(vectors, dtype=np.float64):
        pop = pf_step(pop, v, gmap, rng, cfg)
        estimates.append(pf_estimate(pop))
    xy = np.asarray(estimates)
    return Trajectory(np.arange(len(xy)), xy)


# ---------------------------------------------------------------------------
# CRF / Viterbi map matching


@dataclass
class CRFConfig:
    sigma_m: float = 1.5             # px, transition score spread
    heading_bins: int = 16
    bin_penalty: float = 0.5         # per heading-bin step
    admissibility_scale: float = 1.5
    admissibility_slack: float = 2.0  # px
    fallback_penalty: float = 50.0
    score_scale: float = 1.0


@dataclass
class ReachGraph:
    """Walkable-pixel graph with line-of-sight edges and discrete heading bins."""

    gmap: GridMap
    nsys: NeighborSystem
    heading_bins: int
    node_index: np.ndarray = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return int(np.count_nonzero(self.gmap.walkable))


def crf_build(gmap: GridMap, heading_bins: int = 16) -> ReachGraph:
    """Reach-ability graph: nodes are walkable pixels, edges the precomputed
    line-of-sight moves, with heading bins as the hidden second coordinate."""
    if not np.any(gmap.walkable):
        raise DegenerateDataError("map has no walkable pixels")
    nsys = gmap.neighborhood()
    index = np.full((gmap.height, gmap.width), -1, dtype=np.int64)
    ys, xs = np.nonzero(gmap.walkable)
    index[ys, xs] = np.arange(len(ys))
    return ReachGraph(gmap, nsys, heading_bins, index)


def _shift_scores(arr: np.ndarray, dx: int, dy: int, fill=NEG_INF) -> np.ndarray:
    """Value at (y, x) read from (y - dy, x - dx); out-of-range gets `fill`."""
    out = np.full_like(arr, fill)
    h, w = arr.shape[:2]
    ty0, ty1 = max(0, dy), min(h, h + dy)
    tx0, tx1 = max(0, dx), min(w, w + dx)
    if ty0 < ty1 and tx0 < tx1:
        out[ty0:ty1, tx0:tx1] = arr[ty0 - dy:ty1 - dy, tx0 - dx:tx1 - dx]
    return out


@dataclass
class CRFResult:
    trajectory: Trajectory
    fallback_steps: int
    path_score: float


def crf_localize(graph: ReachGraph, vectors: np.ndarray,
                 init: tuple | None = None, window: int | None = None,
                 cfg: CRFConfig | None = None) -> CRFResult:
    """Windowed Viterbi decoding of the most likely node/heading sequence.

    Hidden state is (walkable pixel, heading bin). Per observed displacement d
    a move by offset o scores -||o - R(bin) d||^2 / (2 sigma_m^2), admitted
    when ||o|| <= admissibility_scale * ||d|| + slack and the graph edge
    exists; heading may drift to adjacent bins at a fixed penalty. States with
    no admissible incoming move fall back to staying put at a large penalty.
    Backtracking happens at every `window` boundary with scores carried
    forward across windows.

    init is None (scores uniform over all states), (x, y) pinning the start
    pixel, or (x, y, bin) pinning pixel and heading bin.
    """
    cfg = cfg or CRFConfig()
    vectors = np.asarray(vectors, dtype=np.float64).reshape(-1, 2)
    if len(vectors) < 1:
        raise InvalidInputError("need at least one velocity vector")
    gmap = graph.gmap
    h, w = gmap.height, gmap.width
    nbins = graph.heading_bins
    walk = gmap.walkable
    window = int(window) if window else len(vectors)

    scores = np.full((h, w, nbins), NEG_INF)
    if init is None:
        scores[walk, :] = 0.0
    elif len(init) == 2:
        x0, y0 = int(init[0]), int(init[1])
        scores[y0, x0, :] = 0.0
    else:
        x0, y0, b0 = int(init[0]), int(init[1]), int(init[2]) % nbins
        scores[y0, x0, b0] = 0.0

    offsets = graph.nsys.offsets
    offset_costs = graph.nsys.costs
    # Edge masks re-indexed at the move target.
    target_valid = [
        _shift_scores(graph.nsys.valid[k].astype(np.float64), int(dx), int(dy),
                      fill=0.0) > 0.5
        for k, (dx, dy) in enumerate(offsets)]

    bin_angles = 2.0 * math.pi * np.arange(nbins) / nbins
    cos_b, sin_b = np.cos(bin_angles), np.sin(bin_angles)
    scale = cfg.score_scale
    inv_two_sigma2 = scale / (2.0 * cfg.sigma_m ** 2)

    bin_moves = np.array([0, -1, 1], dtype=np.int8)
    path: list[tuple[int, int]] = []
    fallback_steps = 0
    bp_bin: list[np.ndarray] = []
    bp_off: list[np.ndarray] = []

    def backtrack(upto: int):
        """Emit pixel states for the buffered steps, best-final-state first."""
        nonlocal fallback_steps
        flat = int(np.argmax(scores))
        y, x, b = np.unravel_index(flat, scores.shape)
        segment = [(int(x), int(y))]
        for t in range(upto - 1, -1, -1):
            k = int(bp_off[t][y, x, b])
            if k == -1:
                fallback_steps += 1
            else:
                dx, dy = offsets[k]
                x, y = int(x - dx), int(y - dy)
            b = int((b + bp_bin[t][y, x, b]) % nbins)
            segment.append((int(x), int(y)))
        segment.reverse()
        path.extend(segment if not path else segment[1:])

    for t, d in enumerate(vectors):
        # Heading relaxation to adjacent bins.
        stay = scores
        left = np.roll(scores, 1, axis=2) - cfg.bin_penalty * scale
        right = np.roll(scores, -1, axis=2) - cfg.bin_penalty * scale
        s1 = stay.copy()
        bbp = np.zeros((h, w, nbins), dtype=np.int8)
        upd = left > s1
        s1[upd] = left[upd]
        bbp[upd] = -1
        upd = right > s1
        s1[upd] = right[upd]
        bbp[upd] = 1
        # Spatial relaxation over admissible offsets.
        speed = float(np.hypot(d[0], d[1]))
        radius = cfg.admissibility_scale * speed + cfg.admissibility_slack
        admissible = np.nonzero(offset_costs <= radius)[0]
        rot_dx = cos_b * d[0] - sin_b * d[1]
        rot_dy = sin_b * d[0] + cos_b * d[1]
        new = np.full_like(scores, NEG_INF)
        obp = np.full((h, w, nbins), -9, dtype=np.int16)
        for k in admissible:
            dx, dy = int(offsets[k, 0]), int(offsets[k, 1])
            move_scores = -((dx - rot_dx) ** 2 + (dy - rot_dy) ** 2) * inv_two_sigma2
            cand = _shift_scores(s1, dx, dy) + move_scores[None, None, :]
            cand[~target_valid[k]] = NEG_INF
            upd = cand > new
            new[upd] = cand[upd]
            obp[upd] = k
        # Fallback: survive in place at a heavy penalty when nothing is admissible.
        stuck = np.isneginf(new) & np.isfinite(s1)
        if np.any(stuck):
            new[stuck] = s1[stuck] - cfg.fallback_penalty * scale
            obp[stuck] = -1
        scores = new
        bp_bin.append(bbp)
        bp_off.append(obp)
        if len(bp_bin) == window or t == len(vectors) - 1:
            backtrack(len(bp_bin))
            bp_bin.clear()
            bp_off.clear()

    xy = np.asarray(path, dtype=np.float64)
    best_score = float(np.max(scores))
    return CRFResult(Trajectory(np.arange(len(xy)), xy), fallback_steps, best_score)
