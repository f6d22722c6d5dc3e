"""SVG overlay reports: walkable region, trajectories with a time gradient,
and a success-rate legend."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .errors import InvalidInputError
from .gridworld import GridMap, Trajectory

# Time gradient: blue at the start, red midway, green at the end.
GRADIENT_STOPS = ((0, "#2040ff"), (50, "#ff3030"), (100, "#10c040"))
SCALE = 10  # svg units per map pixel


def _walkable_rects(gmap: GridMap) -> list[str]:
    """Row-run rectangles covering the walkable region."""
    rects = []
    for y in range(gmap.height):
        row = gmap.walkable[y]
        x = 0
        while x < gmap.width:
            if row[x]:
                x0 = x
                while x < gmap.width and row[x]:
                    x += 1
                rects.append(
                    f'<rect x="{x0 * SCALE}" y="{y * SCALE}" '
                    f'width="{(x - x0) * SCALE}" height="{SCALE}" fill="#e8e8e8"/>')
            else:
                x += 1
    return rects


def _polyline(traj: Trajectory, stroke: str, width: float) -> str:
    pts = " ".join(f"{x * SCALE + SCALE / 2:.1f},{y * SCALE + SCALE / 2:.1f}"
                   for x, y in traj.xy)
    return (f'<polyline fill="none" stroke="{stroke}" stroke-width="{width}" '
            f'points="{pts}"/>')


def _gradient(gid: str, traj: Trajectory) -> str:
    x1, y1 = traj.xy[0] * SCALE + SCALE / 2
    x2, y2 = traj.xy[-1] * SCALE + SCALE / 2
    if (x1, y1) == (x2, y2):
        x2 += 1.0
    stops = "".join(f'<stop offset="{off}%" stop-color="{color}"/>'
                    for off, color in GRADIENT_STOPS)
    return (f'<linearGradient id="{gid}" gradientUnits="userSpaceOnUse" '
            f'x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y2:.1f}">'
            f"{stops}</linearGradient>")


def render_report(gmap: GridMap, gt: Trajectory, predictions: list,
                  title: str = "localization run") -> str:
    """Build the SVG document.

    predictions is a list of (name, Trajectory, sr_dict|None); each trajectory
    becomes exactly one polyline stroked by a start-to-end time gradient.
    """
    if not predictions:
        raise InvalidInputError("no predictions to report")
    width_px = gmap.width * SCALE
    legend_h = 18 * (len(predictions) + 2)
    height_px = gmap.height * SCALE + legend_h
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width_px}" '
        f'height="{height_px}" viewBox="0 0 {width_px} {height_px}">',
        "<defs>",
        _gradient("grad-gt", gt),
    ]
    for i, (_, traj, _) in enumerate(predictions):
        parts.append(_gradient(f"grad-p{i}", traj))
    parts.append("</defs>")
    parts.append(f'<rect width="{width_px}" height="{gmap.height * SCALE}" '
                 f'fill="#404040"/>')
    parts.extend(_walkable_rects(gmap))
    parts.append(_polyline(gt, "url(#grad-gt)", 3.0))
    for i, (_, traj, _) in enumerate(predictions):
        parts.append(_polyline(traj, f"url(#grad-p{i})", 1.5))
    y = gmap.height * SCALE + 14
    parts.append(f'<text x="4" y="{y}" font-size="12" font-family="monospace">'
                 f"{escape(title)} | gradient blue-red-green = time</text>")
    for name, traj, sr in predictions:
        y += 18
        label = f"{escape(name)}: {len(traj)} frames"
        if sr:
            label += " | " + " ".join(f"SR@{tau:g}m={val:.1f}%"
                                      for tau, val in sorted(sr.items()))
        parts.append(f'<text x="4" y="{y}" font-size="12" '
                     f'font-family="monospace">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def save_report(path, gmap: GridMap, gt: Trajectory, predictions: list,
                title: str = "localization run") -> None:
    svg = render_report(gmap, gt, predictions, title)
    with open(path, "w") as f:
        f.write(svg)
