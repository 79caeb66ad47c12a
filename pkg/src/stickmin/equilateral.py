"""Equilateral polishing and the Millett-Rawdon certificate.

A polygon whose edges are all within ``min{mu/n, mu^2/4}`` of unit length
has an exactly equilateral realization of the same knot type nearby.  The
routines here push a near-unit polygon towards unit edges (guarded by
triangle checks), then renormalize and reclose it to floating-point
precision, and finally evaluate the certificate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geom import DEFAULT_EPS, Clearance, cross, edges_within, sweep_clearance
from .polygon import InvalidPolygon, Polygon, UndefinedQuantity, closest_nonadjacent_edges, validate

UNIT_PRECISION = 3 * 2.0 ** -52
DEFAULT_BAND = 5e-6


class NotConverged(RuntimeError):
    """Carries the best polygon found and its maximum unit-length deviation."""

    def __init__(self, message: str, best: Polygon, max_dev: float):
        super().__init__(message)
        self.best = best
        self.max_dev = max_dev


def max_unit_deviation(poly: Polygon) -> float:
    return float(np.max(np.abs(poly.edge_lengths() - 1.0)))


# -------------------------------------------------------------- equalize ---

def _unit_target(o: np.ndarray, a: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Replacement for ``a`` with at least one unit edge to its neighbours."""
    op = p - o
    d = float(np.linalg.norm(op))
    if 0.0 < d < 2.0:
        # nearest point of the circle where the unit spheres about o and p meet
        u = op / d
        m = 0.5 * (o + p)
        w = (a - m) - ((a - m) @ u) * u
        wn = float(np.linalg.norm(w))
        if wn == 0.0:
            helper = np.eye(3)[int(np.argmin(np.abs(u)))]
            w = cross(u, helper)
            wn = float(np.linalg.norm(w))
        return m + math.sqrt(1.0 - d * d / 4.0) * (w / wn)
    best, best_dev = a, math.inf
    for q in (o, p):
        r = a - q
        rn = float(np.linalg.norm(r))
        if rn == 0.0:
            continue
        cand = q + r / rn
        dev = max(abs(float(np.linalg.norm(cand - o)) - 1.0), abs(float(np.linalg.norm(p - cand)) - 1.0))
        if dev < best_dev:
            best, best_dev = cand, dev
    return best


def equalize_edges(
    poly: Polygon,
    target_band: float = DEFAULT_BAND,
    max_iters: int = 1000,
    eps: float = DEFAULT_EPS,
    rng=None,
) -> Polygon:
    """Replace vertices one at a time until every ``|L_i - 1| <= target_band``.

    One iteration is a sweep over all vertices in cyclic order from a random
    starting phase.  A replacement is kept only if it does not raise the
    larger deviation of the two edges it touches and the triangles swept by
    the moving vertex are clear of the rest of the polygon.
    """
    validate(poly)
    rng = np.random.default_rng(rng)
    v = poly.vertices.copy()
    n = len(v)
    best = poly
    best_dev = max_unit_deviation(poly)
    for _ in range(max_iters):
        if best_dev <= target_band:
            return best
        start = int(rng.integers(n))
        for step in range(n):
            i = (start + step) % n
            o, a, p = v[(i - 1) % n], v[i], v[(i + 1) % n]
            a2 = _unit_target(o, a, p)
            before = max(abs(np.linalg.norm(a - o) - 1.0), abs(np.linalg.norm(p - a) - 1.0))
            after = max(abs(np.linalg.norm(a2 - o) - 1.0), abs(np.linalg.norm(p - a2) - 1.0))
            if after > before or np.array_equal(a2, a):
                continue
            if sweep_clearance([(o, a, a2), (p, a, a2)], v, {i}, eps) is Clearance.BLOCKED:
                continue
            trial = v.copy()
            trial[i] = a2
            if n >= 4 and edges_within(trial, ((i - 1) % n, i), eps):
                continue
            v = trial
        dev = float(np.max(np.abs(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1) - 1.0)))
        if dev < best_dev:
            best, best_dev = Polygon(v), dev
    if best_dev <= target_band:
        return best
    raise NotConverged(f"max deviation {best_dev:.3e} after {max_iters} sweeps", best, best_dev)


# ------------------------------------------------------------ renormalize ---

def _edges_of(v: np.ndarray) -> np.ndarray:
    return np.roll(v, -1, axis=0) - v


def _rebuild(origin: np.ndarray, edges: np.ndarray) -> np.ndarray:
    v = np.empty_like(edges)
    v[0] = origin
    v[1:] = origin + np.cumsum(edges[:-1], axis=0)
    return v


def closure_step(e: np.ndarray) -> np.ndarray:
    """One step of ``e_i <- normalize(e_i - delta / n)`` with ``delta = sum e_i``."""
    e = e - e.sum(axis=0) / len(e)
    return e / np.linalg.norm(e, axis=1)[:, None]


def close_unit_vectors(e, tol: float = 1e-14, max_iters: int = 200) -> tuple[np.ndarray, list[float]]:
    """Iterate :func:`closure_step` until ``|sum e_i| <= tol``; returns the vectors and the gap history."""
    e = np.asarray(e, dtype=float)
    e = e / np.linalg.norm(e, axis=1)[:, None]
    gaps = [float(np.linalg.norm(e.sum(axis=0)))]
    while gaps[-1] > tol and len(gaps) <= max_iters:
        e = closure_step(e)
        gaps.append(float(np.linalg.norm(e.sum(axis=0))))
    return e, gaps


def _closed_enough(v: np.ndarray, tol: float) -> bool:
    e = _edges_of(v)
    dev = float(np.max(np.abs(np.linalg.norm(e, axis=1) - 1.0)))
    return dev <= UNIT_PRECISION and float(np.linalg.norm(e.sum(axis=0))) <= tol


def normalize_and_close(poly: Polygon, tol: float = 1e-14, max_iters: int = 200) -> Polygon:
    """Rescale every edge vector to unit length and remove the closure gap.

    Repeats :func:`closure_step` until the gap is at most ``tol`` and the
    edge lengths measured from the rebuilt vertex coordinates are unit to
    within ``3 * 2**-52``.  The polygon is centred at its centroid first so
    that rounding in the coordinates stays small.  A polygon that already
    meets both conditions is returned unchanged.
    """
    if _closed_enough(poly.vertices, tol):
        return poly
    v = poly.vertices - poly.vertices.mean(axis=0)
    e = _edges_of(v)
    e = e / np.linalg.norm(e, axis=1)[:, None]
    origin = v[0]
    for _ in range(max_iters):
        w = _rebuild(origin, e)
        if float(np.linalg.norm(e.sum(axis=0))) <= tol and _closed_enough(w, tol):
            out = Polygon(w)
            try:
                validate(out)
            except InvalidPolygon as exc:
                raise InvalidPolygon(f"closing the polygon broke self-avoidance: {exc}") from exc
            return out
        e = closure_step(e)
    best = Polygon(_rebuild(origin, e))
    gap = float(np.linalg.norm(e.sum(axis=0)))
    raise NotConverged(f"closure gap {gap:.3e}, deviation {max_unit_deviation(best):.3e} after {max_iters} iterations",
                       best, max_unit_deviation(best))


# ------------------------------------------------------------ certificate ---

@dataclass(frozen=True)
class EquilateralCertificate:
    n: int
    mu: float
    max_dev: float
    bound: float
    margin: float
    holds: bool
    closest_edges: tuple[int, int]  # 0-based

    @property
    def margin_exponent(self) -> float:
        return math.log10(self.margin) if self.margin > 0 else -math.inf

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mu": self.mu,
            "max_dev": self.max_dev,
            "bound": self.bound,
            "margin": None if math.isinf(self.margin) else self.margin,
            "holds": self.holds,
            "closest_edges": list(self.closest_edges),
        }


def mr_certificate(poly: Polygon) -> EquilateralCertificate:
    """Millett-Rawdon data; ``holds`` iff ``max |L_i - 1| < min{mu/n, mu^2/4}``.

    Only meaningful for polygons aiming at unit edges: scaling changes ``mu``
    but the deviation is always measured against length 1.
    """
    if poly.n < 4:
        raise UndefinedQuantity("the certificate needs non-adjacent edges (n >= 4)")
    mu, i, j = closest_nonadjacent_edges(poly)
    n = poly.n
    max_dev = max_unit_deviation(poly)
    bound = min(mu / n, mu * mu / 4.0)
    margin = bound / max_dev if max_dev > 0 else math.inf
    return EquilateralCertificate(n, mu, max_dev, bound, margin, max_dev < bound, (i, j))
