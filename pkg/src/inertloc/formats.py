"""On-disk formats: PGM walkable maps, binary float rasters, and CSV sequences."""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .gridworld import CostField, GridMap, Trajectory

RASTER_MAGIC = b"ILC1"


def save_map_pgm(gmap: GridMap, path) -> None:
    """Write a binary PGM (P5, maxval 255); walkable pixels are 255.

    The resolution goes to a `<path>.meta` sidecar as `resolution=<float>`.
    """
    path = Path(path)
    data = np.where(gmap.walkable, 255, 0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{gmap.width} {gmap.height}\n255\n".encode("ascii"))
        f.write(data.tobytes())
    with open(path.with_suffix(path.suffix + ".meta"), "w") as f:
        f.write(f"resolution={gmap.resolution!r}\n")


def load_map_pgm(path) -> GridMap:
    """Read a P5 PGM and its `.meta` sidecar; values >= 128 are walkable."""
    path = Path(path)
    with open(path, "rb") as f:
        raw = f.read()
    tokens = []
    i = 0
    while len(tokens) < 4 and i < len(raw):
        # Skip whitespace and '#' comment lines in the header.
        while i < len(raw) and raw[i:i + 1].isspace():
            i += 1
        if raw[i:i + 1] == b"#":
            while i < len(raw) and raw[i] != 0x0A:
                i += 1
            continue
        j = i
        while j < len(raw) and not raw[j:j + 1].isspace():
            j += 1
        tokens.append(raw[i:j])
        i = j
    if len(tokens) < 4 or tokens[0] != b"P5":
        raise InvalidInputError(f"{path}: not a binary PGM")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise InvalidInputError(f"{path}: expected maxval 255, got {maxval}")
    pixels = np.frombuffer(raw[i + 1:i + 1 + width * height], dtype=np.uint8)
    if pixels.size != width * height:
        raise InvalidInputError(f"{path}: truncated pixel data")
    resolution = 1.0
    meta = path.with_suffix(path.suffix + ".meta")
    if meta.exists():
        for line in meta.read_text().splitlines():
            key, _, value = line.partition("=")
            if key.strip() == "resolution":
                resolution = float(value)
    return GridMap(width, height, resolution, pixels.reshape(height, width) >= 128)


def save_raster(values: np.ndarray, path) -> None:
    """Write a float32 raster: 16-byte header (magic, width, height, pad) + data."""
    values = np.asarray(values)
    if values.ndim != 2:
        raise InvalidInputError("raster must be 2D")
    h, w = values.shape
    with open(path, "wb") as f:
        f.write(RASTER_MAGIC)
        f.write(struct.pack("<II4x", w, h))
        f.write(values.astype("<f4").tobytes())


def load_raster(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.read(16)
        if len(header) != 16 or header[:4] != RASTER_MAGIC:
            raise InvalidInputError(f"{path}: bad raster header")
        w, h = struct.unpack_from("<II", header, 4)
        data = np.frombuffer(f.read(4 * w * h), dtype="<f4")
    if data.size != w * h:
        raise InvalidInputError(f"{path}: truncated raster data")
    return data.reshape(h, w).astype(np.float64)


def save_cost_field(fieldmap: CostField, path) -> None:
    save_raster(fieldmap.values, path)


def load_cost_field(path) -> CostField:
    values = load_raster(path)
    return CostField(values.shape[1], values.shape[0], values)


def save_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "x", "y"])
        for t, (x, y) in zip(traj.t.tolist(), traj.xy.tolist()):
            writer.writerow([t, repr(x), repr(y)])


def load_trajectory_csv(path) -> Trajectory:
    ts, xs, ys = [], [], []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["t", "x", "y"]:
            raise InvalidInputError(f"{path}: expected header t,x,y")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                ts.append(int(row[0]))
                xs.append(float(row[1]))
                ys.append(float(row[2]))
            except (ValueError, IndexError) as exc:
                raise InvalidInputError(f"{path}:{lineno}: bad record {row!r}") from exc
    if not ts:
        raise InvalidInputError(f"{path}: no samples")
    return Trajectory(np.array(ts), np.stack([xs, ys], axis=1))


def save_velocity_csv(vectors: np.ndarray, path, frame_origin: int = 0) -> None:
    vectors = np.asarray(vectors, dtype=np.float64)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "vx", "vy"])
        for k, (vx, vy) in enumerate(vectors.tolist()):
            writer.writerow([frame_origin + k, repr(vx), repr(vy)])


def load_velocity_csv(path):
    """Returns (vectors (N, 2), frame_origin)."""
    ts, vxs, vys = [], [], []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["t", "vx", "vy"]:
            raise InvalidInputError(f"{path}: expected header t,vx,vy")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                ts.append(int(row[0]))
                vxs.append(float(row[1]))
                vys.append(float(row[2]))
            except (ValueError, IndexError) as exc:
                raise InvalidInputError(f"{path}:{lineno}: bad record {row!r}") from exc
    if not ts:
        raise InvalidInputError(f"{path}: no samples")
    return np.stack([vxs, vys], axis=1), ts[0]
