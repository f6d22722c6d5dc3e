"""Walkable-region rasters: derivation from trajectories, wall-penalty fields,
rotation, and shortest paths under a wide line-of-sight neighborhood."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DegenerateDataError, InvalidInputError

SQRT2 = math.sqrt(2.0)

# Neighborhood half-width: moves reach every offset in [-5, 5]^2 except (0, 0).
NEIGHBORHOOD_RADIUS = 5


@dataclass
class Trajectory:
    """Timestamped 2D position sequence in pixel coordinates.

    t holds strictly increasing frame indices; xy is an (N, 2) float array of
    (x, y) pixel positions.
    """

    t: np.ndarray
    xy: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.int64)
        self.xy = np.asarray(self.xy, dtype=np.float64)
        if self.xy.ndim != 2 or self.xy.shape[1] != 2:
            raise InvalidInputError(f"trajectory xy must be (N, 2), got {self.xy.shape}")
        if self.t.shape[0] != self.xy.shape[0]:
            raise InvalidInputError("trajectory t and xy lengths differ")
        if self.t.size > 1 and not np.all(np.diff(self.t) > 0):
            raise InvalidInputError("trajectory timestamps must be strictly increasing")
        if not np.all(np.isfinite(self.xy)):
            raise InvalidInputError("trajectory coordinates must be finite")

    def __len__(self):
        return self.t.shape[0]


@dataclass
class GridMap:
    """Binary walkable-region raster with a physical resolution.

    walkable is an (height, width) boolean array indexed [y, x];
    resolution is in pixels per meter.
    """

    width: int
    height: int
    resolution: float
    walkable: np.ndarray
    _nsys: "NeighborSystem | None" = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidInputError("map extent must be at least 1x1")
        if self.resolution <= 0:
            raise InvalidInputError("resolution must be positive")
        self.walkable = np.asarray(self.walkable, dtype=bool)
        if self.walkable.shape != (self.height, self.width):
            raise InvalidInputError(
                f"walkable raster shape {self.walkable.shape} does not match "
                f"extent {(self.height, self.width)}")

    def is_walkable(self, x: int, y: int) -> bool:
        if 0 <= x < self.width and 0 <= y < self.height:
            return bool(self.walkable[y, x])
        return False

    def walkable_pixels(self) -> np.ndarray:
        """(N, 2) array of (x, y) coordinates of walkable pixels, row-major order."""
        ys, xs = np.nonzero(self.walkable)
        return np.stack([xs, ys], axis=1)

    def neighborhood(self) -> "NeighborSystem":
        """Line-of-sight move system for this map, built once and cached."""
        if self._nsys is None:
            self._nsys = NeighborSystem(self)
        return self._nsys


@dataclass
class CostField:
    """Nonnegative wall-penalty raster aligned with a GridMap."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.height, self.width):
            raise InvalidInputError("cost field shape does not match extent")
        if np.any(self.values < 0):
            raise InvalidInputError("cost field values must be nonnegative")

    def sample_bilinear(self, xy: np.ndarray) -> np.ndarray:
        """Bilinear interpolation at float pixel positions, clamped to the raster."""
        xy = np.atleast_2d(np.asarray(xy, dtype=np.float64))
        x = np.clip(xy[:, 0], 0.0, self.width - 1.0)
        y = np.clip(xy[:, 1], 0.0, self.height - 1.0)
        x0 = np.clip(np.floor(x).astype(int), 0, self.width - 2) if self.width > 1 else np.zeros(len(x), int)
        y0 = np.clip(np.floor(y).astype(int), 0, self.height - 2) if self.height > 1 else np.zeros(len(y), int)
        x1 = np.minimum(x0 + 1, self.width - 1)
        y1 = np.minimum(y0 + 1, self.height - 1)
        fx = x - x0
        fy = y - y0
        v = self.values
        return ((1 - fx) * (1 - fy) * v[y0, x0] + fx * (1 - fy) * v[y0, x1]
                + (1 - fx) * fy * v[y1, x0] + fx * fy * v[y1, x1])


def derive_walkable(trajectories, extent, resolution, clamp=2, sigma=1.0,
                    threshold=0.5) -> GridMap:
    """Derive a walkable-region raster from a trajectory corpus.

    Per-pixel visit counts are clamped (default max 2), Gaussian-smoothed
    (default sigma 1.0 px), and binarized at the threshold (default 0.5).
    """
    trajectories = list(trajectories)
    if not trajectories:
        raise InvalidInputError("no trajectories")
    width, height = int(extent[0]), int(extent[1])
    counts = np.zeros((height, width), dtype=np.int64)
    for traj in trajectories:
        xi = np.rint(traj.xy[:, 0]).astype(int)
        yi = np.rint(traj.xy[:, 1]).astype(int)
        if np.any((xi < 0) | (xi >= width) | (yi < 0) | (yi >= height)):
            raise InvalidInputError("trajectory sample outside the map extent")
        np.add.at(counts, (yi, xi), 1)
    clamped = np.minimum(counts, clamp).astype(np.float64)
    smoothed = ndimage.gaussian_filter(clamped, sigma=sigma, mode="constant", cval=0.0)
    return GridMap(width, height, float(resolution), smoothed > threshold)


def visit_counts(trajectories, extent, clamp=2) -> np.ndarray:
    """Clamped per-pixel visit counts; the pre-smoothing stage of derive_walkable."""
    width, height = int(extent[0]), int(extent[1])
    counts = np.zeros((height, width), dtype=np.int64)
    for traj in trajectories:
        xi = np.rint(traj.xy[:, 0]).astype(int)
        yi = np.rint(traj.xy[:, 1]).astype(int)
        np.add.at(counts, (yi, xi), 1)
    return np.minimum(counts, clamp)


def wall_distance(gmap: GridMap) -> np.ndarray:
    """Grid distance to the nearest non-walkable pixel.

    Multi-source flood fill over the 8-connected grid with step weights
    1 and sqrt(2); non-walkable pixels have distance 0.
    """
    if bool(np.all(gmap.walkable)):
        raise InvalidInputError("map has no non-walkable pixel; wall distance undefined")
    h, w = gmap.height, gmap.width
    dist = np.full((h, w), np.inf, dtype=np.float64)
    heap = []
    ys, xs = np.nonzero(~gmap.walkable)
    for y, x in zip(ys.tolist(), xs.tolist()):
        dist[y, x] = 0.0
        heap.append((0.0, y, x))
    heapq.heapify(heap)
    steps = [(-1, -1, SQRT2), (-1, 0, 1.0), (-1, 1, SQRT2),
             (0, -1, 1.0), (0, 1, 1.0),
             (1, -1, SQRT2), (1, 0, 1.0), (1, 1, SQRT2)]
    while heap:
        d, y, x = heapq.heappop(heap)
        if d > dist[y, x]:
            continue
        for dy, dx, c in steps:
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and d + c < dist[ny, nx]:
                dist[ny, nx] = d + c
                heapq.heappush(heap, (d + c, ny, nx))
    return dist


def distance_cost_field(gmap: GridMap, cap=5.0, sigma=2.0) -> CostField:
    """Wall-penalty field: max(0, cap - wall distance), Gaussian-smoothed.

    The penalty is maximal on walls and falls to zero cap pixels away, so
    minimizing it pushes curves toward corridor centers.
    """
    raw = raw_wall_penalty(gmap, cap)
    smoothed = ndimage.gaussian_filter(raw, sigma=sigma, mode="nearest")
    return CostField(gmap.width, gmap.height, np.maximum(smoothed, 0.0))


def raw_wall_penalty(gmap: GridMap, cap=5.0) -> np.ndarray:
    """Pre-smoothing penalty max(0, cap - wall distance)."""
    return np.maximum(0.0, cap - wall_distance(gmap))


def rotate_map(gmap: GridMap, angle: float) -> GridMap:
    """Rotate the walkable raster about its center by `angle` radians.

    Positive angles rotate (x, y) content by the standard rotation matrix
    [[cos, -sin], [sin, cos]]. The output extent is enlarged to contain the
    rotated bounding box; bilinear resampling is re-thresholded at 0.5.
    """
    if not math.isfinite(angle):
        raise InvalidInputError("rotation angle must be finite")
    w, h = gmap.width, gmap.height
    c, s = math.cos(angle), math.sin(angle)
    new_w = int(math.ceil(w * abs(c) + h * abs(s) - 1e-9))
    new_h = int(math.ceil(w * abs(s) + h * abs(c) - 1e-9))
    cx_in, cy_in = (w - 1) / 2.0, (h - 1) / 2.0
    cx_out, cy_out = (new_w - 1) / 2.0, (new_h - 1) / 2.0
    xs, ys = np.meshgrid(np.arange(new_w, dtype=np.float64),
                         np.arange(new_h, dtype=np.float64))
    dx = xs - cx_out
    dy = ys - cy_out
    # Inverse map: output pixel q samples input at R(-angle) (q - c_out) + c_in.
    src_x = c * dx + s * dy + cx_in
    src_y = -s * dx + c * dy + cy_in
    # Snap sub-epsilon offsets so exact quarter-turns hit grid points.
    for src in (src_x, src_y):
        rounded = np.rint(src)
        near = np.abs(src - rounded) < 1e-9
        src[near] = rounded[near]
    sampled = ndimage.map_coordinates(gmap.walkable.astype(np.float64),
                                      [src_y, src_x], order=1,
                                      mode="constant", cval=0.0)
    return GridMap(new_w, new_h, gmap.resolution, sampled >= 0.5)


def _bresenham(dx: int, dy: int):
    """Integer Bresenham pixels from (0, 0) to (dx, dy), endpoints included."""
    pixels = []
    x, y = 0, 0
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    adx, ady = abs(dx), abs(dy)
    err = adx - ady
    while True:
        pixels.append((x, y))
        if x == dx and y == dy:
            break
        e2 = 2 * err
        if e2 > -ady:
            err -= ady
            x += sx
        if e2 < adx:
            err += adx
            y += sy
    return pixels


class NeighborSystem:
    """Precomputed move system: all offsets within the square neighborhood whose
    straight raster segment is fully walkable, plus connectivity labels.

    Offsets between opposite directions share one pixel set, so edge validity
    is symmetric by construction.
    """

    def __init__(self, gmap: GridMap, radius: int = NEIGHBORHOOD_RADIUS):
        self.gmap = gmap
        self.radius = radius
        offsets = []
        for dy in range(-radius, radius + 1):
            for dx in range(-radius, radius + 1):
                if dx == 0 and dy == 0:
                    continue
                offsets.append((dx, dy))
        self.offsets = np.array(offsets, dtype=np.int64)
        self.costs = np.hypot(self.offsets[:, 0], self.offsets[:, 1])
        self.valid = np.zeros((len(offsets), gmap.height, gmap.width), dtype=bool)
        for k, (dx, dy) in enumerate(offsets):
            self.valid[k] = self._offset_mask(gmap.walkable, dx, dy)
        structure = np.ones((3, 3), dtype=int)
        self.labels, self.n_components = ndimage.label(gmap.walkable, structure=structure)

    @staticmethod
    def _offset_mask(walkable: np.ndarray, dx: int, dy: int) -> np.ndarray:
        # Canonical direction so (dx, dy) and (-dx, -dy) test the same pixels.
        if dx > 0 or (dx == 0 and dy > 0):
            rel = _bresenham(dx, dy)
        else:
            rel = [(dx + u, dy + v) for (u, v) in _bresenham(-dx, -dy)]
        h, w = walkable.shape
        mask = np.ones((h, w), dtype=bool)
        for u, v in rel:
            shifted = np.zeros((h, w), dtype=bool)
            ys0, ys1 = max(0, -v), min(h, h - v)
            xs0, xs1 = max(0, -u), min(w, w - u)
            if ys0 < ys1 and xs0 < xs1:
                shifted[ys0:ys1, xs0:xs1] = walkable[ys0 + v:ys1 + v, xs0 + u:xs1 + u]
            mask &= shifted
        return mask

    def connected(self, a, b) -> bool:
        la = self.labels[a[1], a[0]]
        lb = self.labels[b[1], b[0]]
        return la > 0 and la == lb

    def neighbors(self, x: int, y: int):
        """Yields (nx, ny, cost) for every valid move from (x, y)."""
        for k in range(len(self.offsets)):
            if self.valid[k, y, x]:
                dx, dy = self.offsets[k]
                yield x + int(dx), y + int(dy), float(self.costs[k])


def shortest_path(gmap: GridMap, start, goal) -> Trajectory | None:
    """Minimal-cost pixel path between two walkable pixels, or None.

    Moves connect pixels within the square neighborhood whose connecting
    raster segment is fully walkable; move cost is the Euclidean offset
    length. Returns a Trajectory with unit timestamps, or None when either
    endpoint is non-walkable or no path exists.
    """
    start = (int(start[0]), int(start[1]))
    goal = (int(goal[0]), int(goal[1]))
    if not (gmap.is_walkable(*start) and gmap.is_walkable(*goal)):
        return None
    if start == goal:
        return Trajectory(np.array([0]), np.array([[start[0], start[1]]], dtype=float))
    nsys = gmap.neighborhood()
    if not nsys.connected(start, goal):
        return None
    h, w = gmap.height, gmap.width
    dist = np.full((h, w), np.inf)
    parent = np.full((h, w, 2), -1, dtype=np.int64)
    dist[start[1], start[0]] = 0.0
    heap = [(0.0, start[0], start[1])]
    while heap:
        d, x, y = heapq.heappop(heap)
        if d > dist[y, x]:
            continue
        if (x, y) == goal:
            break
        for nx, ny, c in nsys.neighbors(x, y):
            nd = d + c
            if nd < dist[ny, nx]:
                dist[ny, nx] = nd
                parent[ny, nx] = (x, y)
                heapq.heappush(heap, (nd, nx, ny))
    if not np.isfinite(dist[goal[1], goal[0]]):
        return None
    path = [goal]
    while path[-1] != start:
        px, py = parent[path[-1][1], path[-1][0]]
        path.append((int(px), int(py)))
    path.reverse()
    xy = np.array(path, dtype=np.float64)
    return Trajectory(np.arange(len(path)), xy)


def path_cost(traj: Trajectory) -> float:
    """Total Euclidean length of a vertex path."""
    if len(traj) < 2:
        return 0.0
    return float(np.sum(np.hypot(*(np.diff(traj.xy, axis=0).T))))


def sample_endpoints(gmap: GridMap, rng: np.random.Generator,
                     min_separation: float = 20.0, max_rejects: int = 1000):
    """Draw two mutually reachable walkable pixels at least min_separation apart.

    Both pixels are redrawn uniformly until the pair is valid; raises
    DegenerateDataError after max_rejects consecutive rejections.
    """
    pixels = gmap.walkable_pixels()
    if len(pixels) < 2:
        raise DegenerateDataError("map has fewer than two walkable pixels")
    nsys = gmap.neighborhood()
    rejects = 0
    while rejects < max_rejects:
        ia = int(rng.integers(len(pixels)))
        ib = int(rng.integers(len(pixels)))
        a = (int(pixels[ia, 0]), int(pixels[ia, 1]))
        b = (int(pixels[ib, 0]), int(pixels[ib, 1]))
        sep = math.hypot(a[0] - b[0], a[1] - b[1])
        if sep >= min_separation and nsys.connected(a, b):
            return a, b
        rejects += 1
    raise DegenerateDataError(
        f"no endpoint pair with separation >= {min_separation} found "
        f"after {max_rejects} draws")
