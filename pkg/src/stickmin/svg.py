"""Orthographic knot diagrams as SVG, with breaks in the under-strands."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .polygon import Polygon
from .verify import _crossings_along, _frame

GAP = 0.025  # half-width of an under-strand break, as a fraction of the diagram size
SIZE = 400.0
MARGIN = 20.0


def _generic_direction(poly: Polygon, direction) -> tuple[np.ndarray, list]:
    d = np.asarray(direction, dtype=float)
    raw = _crossings_along(poly.vertices, d)
    rng = np.random.default_rng(0)  # fixed, so the fallback view is reproducible
    while raw is None:
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        raw = _crossings_along(poly.vertices, d)
    return d, raw


def _subtract(intervals: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Pieces of [0, 1] left after removing the given intervals."""
    pieces, pos = [], 0.0
    for lo, hi in sorted(intervals):
        if lo > pos:
            pieces.append((pos, lo))
        pos = max(pos, hi)
    if pos < 1.0:
        pieces.append((pos, 1.0))
    return pieces


def projection_svg(poly: Polygon, direction=(0.0, 0.0, 1.0)) -> str:
    """SVG text of the projection along ``direction``; resampled if not generic."""
    d, raw = _generic_direction(poly, direction)
    frame = _frame(d)
    xy = poly.vertices @ frame[:2].T
    lo = xy.min(axis=0)
    span = float(max(np.ptp(xy, axis=0).max(), 1e-300))
    pts = (xy - lo) / span * (SIZE - 2 * MARGIN) + MARGIN
    pts[:, 1] = SIZE - pts[:, 1]  # svg y runs downwards
    n = poly.n
    cuts: list[list[tuple[float, float]]] = [[] for _ in range(n)]
    for i, s, j, t, over_is_i, _, _ in raw:
        e, u = (j, t) if over_is_i else (i, s)
        length = float(np.linalg.norm(xy[(e + 1) % n] - xy[e])) / span
        half = GAP / length
        cuts[e].append((u - half, u + half))
    lines = []
    for e in range(n):
        a, b = pts[e], pts[(e + 1) % n]
        for s0, s1 in _subtract(cuts[e]):
            p0, p1 = a + s0 * (b - a), a + s1 * (b - a)
            lines.append(f'<line x1="{p0[0]:.3f}" y1="{p0[1]:.3f}" x2="{p1[0]:.3f}" y2="{p1[1]:.3f}"/>')
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE:g}" height="{SIZE:g}" '
            f'viewBox="0 0 {SIZE:g} {SIZE:g}">')
    body = '<g stroke="black" stroke-width="3" stroke-linecap="round" fill="none">'
    return "\n".join([head, body, *lines, "</g>", "</svg>"]) + "\n"


def export_projection_svg(poly: Polygon, direction, path) -> None:
    Path(path).write_text(projection_svg(poly, direction), encoding="utf-8")
