"""Knot-type fingerprints from generic projections.

A polygon is projected orthographically along a random direction, the
crossings are read off as a planar diagram, and the Alexander polynomial is
evaluated numerically from the Wirtinger presentation.  Only magnitudes on
the unit circle are reported; they are independent of the ``±t^k``
ambiguity, of the diagram, and of mirroring.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .polygon import Polygon

GENERIC_REL_TOL = 1e-9


class NoGenericProjection(RuntimeError):
    pass


class SingularInput(ValueError):
    """The arc bookkeeping of a diagram is inconsistent."""


class MismatchedSamples(ValueError):
    pass


class KnotTypeChanged(RuntimeError):
    """A sampled invariant changed during a run; this would indicate a bug."""


class DeterminantError(ArithmeticError):
    """|Δ(-1)| is too far from an integer to be trusted."""


@dataclass(frozen=True)
class Crossing:
    over_arc: int
    under_in_arc: int
    under_out_arc: int
    sign: int


@dataclass
class DiagramCode:
    """Wirtinger data of a one-component diagram.

    ``pd`` holds the same diagram as a planar-diagram code: one 4-tuple of
    edge labels per crossing, counter-clockwise from the incoming under edge.
    """

    crossings: list[Crossing]
    arc_count: int
    pd: list[tuple[int, int, int, int]] = field(default_factory=list)

    @property
    def crossing_count(self) -> int:
        return len(self.crossings)

    def check(self) -> None:
        m = len(self.crossings)
        if self.arc_count != m:
            raise SingularInput(f"{m} crossings but {self.arc_count} arcs")
        ins = sorted(c.under_in_arc for c in self.crossings)
        outs = sorted(c.under_out_arc for c in self.crossings)
        if ins != list(range(m)) or outs != list(range(m)):
            raise SingularInput("every arc must end and start at exactly one undercrossing")
        if any(not 0 <= c.over_arc < m for c in self.crossings):
            raise SingularInput("over arc out of range")
        if any(c.sign not in (1, -1) for c in self.crossings):
            raise SingularInput("crossing signs must be +1 or -1")


def _frame(direction: np.ndarray) -> np.ndarray:
    d = direction / np.linalg.norm(direction)
    helper = np.eye(3)[int(np.argmin(np.abs(d)))]
    e1 = np.cross(d, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(d, e1)
    return np.vstack([e1, e2, d])  # e1 x e2 = d


def _cross2(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _point_seg_dist2d(x, a, b):
    d = b - a
    dd = np.einsum("...i,...i->...", d, d)
    s = np.clip(np.einsum("...i,...i->...", x - a, d) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
    return np.linalg.norm(x - a - s[..., None] * d, axis=-1)


def _crossings_along(vertices: np.ndarray, direction: np.ndarray):
    """Return the raw crossing list for one direction, or None if non-generic.

    Each entry is ``(i, s, j, t, over_is_i)`` with edge ``i`` at parameter
    ``s`` crossing edge ``j`` at parameter ``t`` in the projection.
    """
    frame = _frame(direction)
    xy = vertices @ frame[:2].T
    h = vertices @ frame[2]
    n = len(vertices)
    nxt = np.roll(np.arange(n), -1)
    a, b = xy, xy[nxt]
    diam = float(np.ptp(xy, axis=0).max())
    if diam == 0.0:
        return None
    tol = GENERIC_REL_TOL * diam

    seg = b - a
    seglen = np.linalg.norm(seg, axis=1)
    if np.any(seglen <= tol):
        return None
    prev = np.roll(seg, 1, axis=0)
    turn = np.abs(_cross2(prev, seg)) / (seglen * np.roll(seglen, 1))
    if np.any((turn <= GENERIC_REL_TOL) & (np.einsum("ij,ij->i", prev, seg) < 0)):
        return None

    # vertex images must stay off non-incident edge images
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    dist = _point_seg_dist2d(xy[:, None, :], a[None, :, :], b[None, :, :])
    incident = (i == k) | (i == (k - 1) % n)
    if np.any(dist[~incident] <= tol):
        return None

    ii, jj = np.triu_indices(n, k=2)
    keep = ~((ii == 0) & (jj == n - 1))
    ii, jj = ii[keep], jj[keep]
    p, r = a[ii], seg[ii]
    q, w = a[jj], seg[jj]
    den = _cross2(r, w)
    ok = den != 0.0
    den_safe = np.where(ok, den, 1.0)
    s = _cross2(q - p, w) / den_safe
    t = _cross2(q - p, r) / den_safe
    hit = ok & (s > 0) & (s < 1) & (t > 0) & (t < 1)
    ii, jj, s, t = ii[hit], jj[hit], s[hit], t[hit]
    if len(ii) == 0:
        return []

    pts = a[ii] + s[:, None] * seg[ii]
    if len(pts) > 1:
        gaps = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() <= tol:
            return None
    hi = h[ii] + s * (h[nxt[ii]] - h[ii])
    hj = h[jj] + t * (h[nxt[jj]] - h[jj])
    if np.any(np.abs(hi - hj) <= tol):
        return None
    return [(int(a_), float(b_), int(c_), float(d_), bool(e_), r_, w_)
            for a_, b_, c_, d_, e_, r_, w_ in zip(ii, s, jj, t, hi > hj, seg[ii], seg[jj])]


def _diagram_from_crossings(raw) -> DiagramCode:
    m = len(raw)
    if m == 0:
        return DiagramCode([], 0, [])
    # events: (position along curve, crossing id, is_over)
    events = []
    signs = []
    for cid, (i, s, j, t, over_is_i, r, w) in enumerate(raw):
        over_dir, under_dir = (r, w) if over_is_i else (w, r)
        signs.append(1 if _cross2(over_dir, under_dir) > 0 else -1)
        events.append((i + s, cid, over_is_i))
        events.append((j + t, cid, not over_is_i))
    events.sort()
    total = len(events)
    under_at = {}
    over_at = {}
    for pos, (_, cid, is_over) in enumerate(events):
        (over_at if is_over else under_at)[cid] = pos

    # arcs are cut at undercrossings; edge e runs from event e to event e+1
    under_positions = set(under_at.values())
    arc_of_edge = np.empty(total, dtype=int)
    first = min(under_positions)
    arc = -1
    for step in range(total):
        e = (first + step) % total
        if e in under_positions:
            arc += 1
        arc_of_edge[e] = arc

    crossings = []
    pd = []
    for cid in range(m):
        u, o = under_at[cid], over_at[cid]
        crossings.append(Crossing(
            over_arc=int(arc_of_edge[o]),
            under_in_arc=int(arc_of_edge[(u - 1) % total]),
            under_out_arc=int(arc_of_edge[u]),
            sign=signs[cid],
        ))
        u_in, u_out = (u - 1) % total, u
        o_in, o_out = (o - 1) % total, o
        if signs[cid] > 0:
            pd.append((u_in, o_out, u_out, o_in))
        else:
            pd.append((u_in, o_in, u_out, o_out))
    return DiagramCode(crossings, m, pd)


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def random_direction(rng) -> np.ndarray:
    v = _as_rng(rng).normal(size=3)
    return v / np.linalg.norm(v)


def diagram_along(poly: Polygon, direction) -> DiagramCode | None:
    """Diagram seen from ``direction``, or None if that view is not generic."""
    raw = _crossings_along(np.asarray(poly.vertices, dtype=float), np.asarray(direction, dtype=float))
    if raw is None:
        return None
    return _diagram_from_crossings(raw)


def project_generic(poly: Polygon, rng=None, max_attempts: int = 100) -> tuple[np.ndarray, DiagramCode]:
    rng = _as_rng(rng)
    for _ in range(max_attempts):
        d = random_direction(rng)
        code = diagram_along(poly, d)
        if code is not None:
            return d, code
    raise NoGenericProjection(f"no generic direction in {max_attempts} attempts")


def alexander_matrix(code: DiagramCode, t: complex) -> np.ndarray:
    m = code.crossing_count
    a = np.zeros((m, m), dtype=complex)
    for row, c in enumerate(code.crossings):
        a[row, c.over_arc] += 1 - t
        if c.sign > 0:
            a[row, c.under_in_arc] += t
            a[row, c.under_out_arc] += -1
        else:
            a[row, c.under_in_arc] += -1
            a[row, c.under_out_arc] += t
    return a


def alexander_eval(code: DiagramCode, t: complex, row: int = -1, col: int = -1) -> float:
    """|Δ(t)| from the reduced Alexander matrix (drops ``row`` and ``col``)."""
    code.check()
    m = code.crossing_count
    if m <= 1:
        return 1.0
    a = alexander_matrix(code, t)
    a = np.delete(np.delete(a, row % m, axis=0), col % m, axis=1)
    return float(abs(np.linalg.det(a)))


def determinant(code: DiagramCode) -> int:
    value = alexander_eval(code, -1.0)
    rounded = int(round(value))
    if abs(value - rounded) >= max(1e-6, 1e-12 * value):
        raise DeterminantError(f"|Δ(-1)| = {value!r} is not near an integer")
    return rounded


@dataclass
class InvariantReport:
    determinant: int
    t: np.ndarray  # sample points on the unit circle
    magnitudes: np.ndarray
    crossing_count: int
    direction: np.ndarray

    @property
    def samples(self) -> list[tuple[complex, float]]:
        return list(zip(self.t.tolist(), self.magnitudes.tolist()))

    def to_dict(self) -> dict:
        return {
            "determinant": self.determinant,
            "crossing_count": self.crossing_count,
            "direction": self.direction.tolist(),
            "samples": [
                {"t": [z.real, z.imag], "magnitude": m} for z, m in self.samples
            ],
        }


def unit_circle_samples(count: int, rng) -> np.ndarray:
    theta = _as_rng(rng).uniform(0.0, 2 * np.pi, size=count)
    return np.exp(1j * theta)


def invariant_report(
    poly: Polygon,
    sample_count: int = 100,
    rng=None,
    max_attempts: int = 100,
    direction=None,
) -> InvariantReport:
    """Determinant plus |Δ(t)| at ``sample_count`` random points of the unit circle.

    The sample points are drawn before the projection direction, so two
    reports made with equal seeds share their points.  A fixed ``direction``
    may be given instead of a random one; it must be generic.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be positive")
    rng = _as_rng(rng)
    ts = unit_circle_samples(sample_count, rng)
    if direction is None:
        direction, code = project_generic(poly, rng, max_attempts)
    else:
        direction = np.asarray(direction, dtype=float) / np.linalg.norm(direction)
        code = diagram_along(poly, direction)
        if code is None:
            raise NoGenericProjection(f"direction {direction.tolist()} is not generic")
    mags = np.array([alexander_eval(code, z) for z in ts])
    return InvariantReport(determinant(code), ts, mags, code.crossing_count, direction)


def polygon_determinant(poly: Polygon, rng=None) -> int:
    return determinant(project_generic(poly, rng)[1])


def magnitudes_agree(x, y, rel_tol: float = 1e-6, abs_floor: float = 1e-9) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    tiny = (x < abs_floor) & (y < abs_floor)
    rel = np.abs(x - y) <= rel_tol * np.maximum(np.abs(x), np.abs(y))
    return np.where(tiny, np.abs(x - y) <= abs_floor, rel)


def compare_invariants(a: InvariantReport, b: InvariantReport, rel_tol: float = 1e-6) -> bool:
    if a.t.shape != b.t.shape or not np.array_equal(a.t, b.t):
        raise MismatchedSamples("reports were evaluated at different points")
    if a.determinant != b.determinant:
        return False
    return bool(np.all(magnitudes_agree(a.magnitudes, b.magnitudes, rel_tol)))
