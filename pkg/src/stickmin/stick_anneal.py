"""Off-lattice moves and the two stick-reduction stages.

Every move imagines the displaced vertices travelling along straight lines
and checks the triangles they sweep against the rest of the polygon; a move
that passes those checks is an ambient isotopy.  The unit stage uses
length-preserving moves (fold, shrink, grow); the free stage swaps shrink and
grow for triangle collapse and inflation, which let edge lengths vary.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geom import DEFAULT_EPS, Clearance, cross, edges_within, sweep_clearance
from .polygon import Polygon
from .verify import KnotTypeChanged, polygon_determinant

UNIT_TOL = 1e-9


class MoveStatus(enum.Enum):
    ACCEPTED = "accepted"
    REJECTED_PRECONDITION = "rejected-precondition"
    REJECTED_TRIANGLE_CHECK = "rejected-triangle-check"
    REJECTED_METROPOLIS = "rejected-metropolis"


@dataclass(frozen=True)
class MoveOutcome:
    status: MoveStatus
    new_polygon: Polygon | None = None

    @property
    def accepted(self) -> bool:
        return self.status is MoveStatus.ACCEPTED


_PRECONDITION = MoveOutcome(MoveStatus.REJECTED_PRECONDITION)
_BLOCKED = MoveOutcome(MoveStatus.REJECTED_TRIANGLE_CHECK)
_METROPOLIS = MoveOutcome(MoveStatus.REJECTED_METROPOLIS)


def _perp_basis(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.eye(3)[int(np.argmin(np.abs(u)))]
    e1 = cross(u, helper)
    e1 /= np.linalg.norm(e1)
    return e1, cross(u, e1)


def _edges_clear(verts: np.ndarray, edge_ids, eps: float) -> bool:
    """New edges must stay more than ``eps`` from every non-adjacent edge."""
    if len(verts) < 4:
        return True
    return not edges_within(verts, edge_ids, eps)


def _finish(new_verts: np.ndarray, new_edges, eps: float) -> MoveOutcome:
    if not _edges_clear(new_verts, new_edges, eps):
        return _BLOCKED
    return MoveOutcome(MoveStatus.ACCEPTED, Polygon(new_verts))


def rotate_about_axis(x: np.ndarray, o: np.ndarray, p: np.ndarray, angle: float) -> np.ndarray:
    k = p - o
    k = k / np.linalg.norm(k)
    r = x - o
    par = (r @ k) * k
    perp = r - par
    return o + par + math.cos(angle) * perp + math.sin(angle) * cross(k, perp)


def fold_move(poly: Polygon, i: int, angle: float, eps: float = DEFAULT_EPS) -> MoveOutcome:
    """Rotate vertex ``i`` about the line through its neighbours."""
    v = poly.vertices
    n = len(v)
    i %= n
    o, a, p = v[(i - 1) % n], v[i], v[(i + 1) % n]
    if np.array_equal(o, p):
        return _PRECONDITION
    a2 = rotate_about_axis(a, o, p, angle)
    if sweep_clearance([(o, a, a2), (p, a, a2)], v, {i}, eps) is Clearance.BLOCKED:
        return _BLOCKED
    new = v.copy()
    new[i] = a2
    return _finish(new, (i - 1, i), eps)


def shrink_apex(o: np.ndarray, p: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Apex ``c`` with ``|o-c| = |c-p| = 1`` on the side of ``r`` (``r`` unit, orthogonal to op)."""
    d = float(np.linalg.norm(p - o))
    h = math.sqrt(max(0.0, 1.0 - d * d / 4.0))
    return 0.5 * (o + p) + h * r


def shrink_move(
    poly: Polygon,
    i: int,
    plane_angle: float = 0.0,
    eps: float = DEFAULT_EPS,
    r: np.ndarray | None = None,
) -> MoveOutcome:
    """Replace unit edges o-a-b-p by o-c-p with both new edges of unit length.

    The plane through ``op`` is chosen by ``plane_angle`` (or directly by the
    in-plane unit vector ``r`` orthogonal to ``op``).
    """
    v = poly.vertices
    n = len(v)
    if n < 4:
        return _PRECONDITION
    i %= n
    ia, ib = i, (i + 1) % n
    o, a, b, p = v[(i - 1) % n], v[ia], v[ib], v[(i + 2) % n]
    for x, y in ((o, a), (a, b), (b, p)):
        if abs(float(np.linalg.norm(y - x)) - 1.0) > UNIT_TOL:
            return _PRECONDITION
    op = p - o
    d = float(np.linalg.norm(op))
    if d > 2.0 or d == 0.0:
        return _PRECONDITION
    if r is None:
        e1, e2 = _perp_basis(op / d)
        r = math.cos(plane_angle) * e1 + math.sin(plane_angle) * e2
    c = shrink_apex(o, p, np.asarray(r, dtype=float))
    tris = [(o, a, c), (a, b, c), (b, c, p)]
    if sweep_clearance(tris, v, {ia, ib}, eps) is Clearance.BLOCKED:
        return _BLOCKED
    if ib > ia:
        new = np.concatenate([v[:ia], c[None], v[ib + 1:]])
        k = ia
    else:
        new = np.concatenate([v[1:n - 1], c[None]])
        k = n - 2
    return _finish(new, (k - 1, k), eps)


def grow_points(o: np.ndarray, c: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    """Trapezoid vertices ``a, b`` with ``|o-a| = |a-b| = |b-p| = 1``, on c's side of op.

    None when the trapezoid does not exist (o, c, p collinear or ``|o-p| > 3``).
    """
    op = p - o
    d = float(np.linalg.norm(op))
    if d > 3.0 or d == 0.0:
        return None
    u = op / d
    w = (c - o) - ((c - o) @ u) * u
    wn = float(np.linalg.norm(w))
    scale = max(1.0, float(np.max(np.abs(np.stack([o, c, p])))))
    if wn <= 1e-12 * scale:
        return None
    w = w / wn
    off = (d - 1.0) / 2.0
    h = math.sqrt(max(0.0, 1.0 - off * off))
    a = o + off * u + h * w
    return a, a + u


def grow_move(poly: Polygon, i: int, eps: float = DEFAULT_EPS) -> MoveOutcome:
    """Split vertex ``c = v[i]`` into two, adding one unit edge."""
    v = poly.vertices
    n = len(v)
    i %= n
    o, c, p = v[(i - 1) % n], v[i], v[(i + 1) % n]
    pts = grow_points(o, c, p)
    if pts is None:
        return _PRECONDITION
    a, b = pts
    tris = [(o, a, c), (a, b, c), (b, c, p)]
    if sweep_clearance(tris, v, {i}, eps) is Clearance.BLOCKED:
        return _BLOCKED
    new = np.concatenate([v[:i], a[None], b[None], v[i + 1:]])
    return _finish(new, (i - 1, i, i + 1), eps)


COLLAPSE_MIN_SQ = 1.0 / 8.0


def collapse_move(poly: Polygon, i: int, eps: float = DEFAULT_EPS) -> MoveOutcome:
    """Delete vertex ``i``, replacing its two edges by one."""
    v = poly.vertices
    n = len(v)
    if n < 4:
        return _PRECONDITION
    i %= n
    o, c, p = v[(i - 1) % n], v[i], v[(i + 1) % n]
    if float((p - o) @ (p - o)) <= COLLAPSE_MIN_SQ:
        return _PRECONDITION
    if sweep_clearance([(o, c, p)], v, {i}, eps) is Clearance.BLOCKED:
        return _BLOCKED
    new = np.delete(v, i, axis=0)
    return _finish(new, ((i - 1) % (n - 1),), eps)


INFLATE_T_RANGE = (-0.5, 1.5)


def inflate_move(poly: Polygon, i: int, r, t: float, u: float, eps: float = DEFAULT_EPS) -> MoveOutcome:
    """Insert ``c = o + t (p - o) + u r`` into edge ``i`` (from ``o = v[i]`` to ``p = v[i+1]``)."""
    v = poly.vertices
    n = len(v)
    i %= n
    o, p = v[i], v[(i + 1) % n]
    r = np.asarray(r, dtype=float)
    op = p - o
    if abs(float(np.linalg.norm(r)) - 1.0) > 1e-9 or abs(float(r @ op)) > 1e-9 * float(np.linalg.norm(op)):
        raise ValueError("r must be a unit vector orthogonal to the edge")
    if not (INFLATE_T_RANGE[0] <= t <= INFLATE_T_RANGE[1] and 0.0 <= u <= 1.0):
        raise ValueError("need t in [-1/2, 3/2] and u in [0, 1]")
    c = o + t * op + u * r
    if u <= 1e-12 * max(1.0, float(np.linalg.norm(op))):
        return _PRECONDITION
    new = np.concatenate([v[:i + 1], c[None], v[i + 1:]])
    if sweep_clearance([(o, p, c)], new, {i + 1}, eps) is Clearance.BLOCKED:
        return _BLOCKED
    return _finish(new, (i, i + 1), eps)


def random_orthogonal_unit(direction: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = direction / np.linalg.norm(direction)
    e1, e2 = _perp_basis(u)
    phi = rng.uniform(0.0, 2 * np.pi)
    return math.cos(phi) * e1 + math.sin(phi) * e2


# ------------------------------------------------------------------ stages ---

UNIT_WEIGHTS = {"fold": 0.6, "shrink": 0.3, "grow": 0.1}
FREE_WEIGHTS = {"fold": 0.6, "collapse": 0.3, "inflate": 0.1}
DELTA_N = {"fold": 0, "shrink": -1, "collapse": -1, "grow": 1, "inflate": 1}


@dataclass
class StageConfig:
    move_weights: dict[str, float] | None = None  # stage default when None
    p_grow: float = 0.05
    eps: float = DEFAULT_EPS
    max_iters: int = 1_000_000
    verify_every: int = 1000  # accepted moves between determinant checks; 0 disables
    time_budget: float | None = None
    target: int | None = None  # stop as soon as this many sticks is reached

    def __post_init__(self):
        if not 0.0 <= self.p_grow < 1.0:
            raise ValueError("p_grow must lie in [0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.move_weights is not None:
            total = sum(self.move_weights.values())
            if abs(total - 1.0) > 1e-9 or any(w < 0 for w in self.move_weights.values()):
                raise ValueError("move weights must be non-negative and sum to 1")


@dataclass
class StageRun:
    best: Polygon
    iterations: int
    accepted: int
    checks: int
    counts: dict[str, dict[str, int]] = field(default_factory=dict)
    best_history: list[tuple[int, int]] = field(default_factory=list)


def _propose(kind: str, poly: Polygon, i: int, eps: float, rng: np.random.Generator) -> MoveOutcome:
    if kind == "fold":
        return fold_move(poly, i, rng.uniform(-np.pi, np.pi), eps)
    if kind == "shrink":
        return shrink_move(poly, i, rng.uniform(0.0, 2 * np.pi), eps)
    if kind == "grow":
        return grow_move(poly, i, eps)
    if kind == "collapse":
        return collapse_move(poly, i, eps)
    if kind == "inflate":
        o, p = poly.vertices[i], poly.vertices[(i + 1) % poly.n]
        r = random_orthogonal_unit(p - o, rng)
        return inflate_move(poly, i, r, rng.uniform(*INFLATE_T_RANGE), rng.uniform(0.0, 1.0), eps)
    raise ValueError(f"unknown move {kind!r}")


def run_stage(
    poly: Polygon,
    cfg: StageConfig,
    rng: np.random.Generator,
    weights: dict[str, float],
    on_accept: Callable[[str, Polygon, Polygon], None] | None = None,
) -> StageRun:
    """Fixed-probability annealing loop shared by both stages.

    Moves that lower or keep the edge count are accepted whenever they pass
    triangle checks; moves that add an edge are first accepted with
    probability ``cfg.p_grow``.  Returns the fewest-edge polygon seen.
    """
    kinds = list(weights)
    probs = np.array([weights[k] for k in kinds], dtype=float)
    cdf = np.cumsum(probs / probs.sum())
    det0 = polygon_determinant(poly, rng) if cfg.verify_every else None
    counts = {k: {s.value: 0 for s in MoveStatus} for k in kinds}
    best, best_n = poly, poly.n
    history = [(0, best_n)]
    accepted = checks = 0
    deadline = None if cfg.time_budget is None else time.monotonic() + cfg.time_budget
    it = 0
    while it < cfg.max_iters:
        if cfg.target is not None and best_n <= cfg.target:
            break
        if deadline is not None and it % 64 == 0 and time.monotonic() > deadline:
            break
        it += 1
        kind = kinds[min(int(np.searchsorted(cdf, rng.random(), side="right")), len(kinds) - 1)]
        if DELTA_N[kind] > 0 and not rng.random() < cfg.p_grow:
            counts[kind][MoveStatus.REJECTED_METROPOLIS.value] += 1
            continue
        i = int(rng.integers(poly.n))
        out = _propose(kind, poly, i, cfg.eps, rng)
        counts[kind][out.status.value] += 1
        if not out.accepted:
            continue
        if on_accept is not None:
            on_accept(kind, poly, out.new_polygon)
        poly = out.new_polygon
        accepted += 1
        if poly.n < best_n:
            best, best_n = poly, poly.n
            history.append((it, best_n))
        if cfg.verify_every and accepted % cfg.verify_every == 0:
            checks += 1
            det = polygon_determinant(poly, rng)
            if det != det0:
                raise KnotTypeChanged(f"determinant {det0} became {det} after {accepted} moves")
    return StageRun(best, it, accepted, checks, counts, history)


def check_unit_edges(poly: Polygon, tol: float = UNIT_TOL) -> None:
    dev = float(np.max(np.abs(poly.edge_lengths() - 1.0)))
    if dev > tol:
        raise ValueError(f"unit-stick stage needs unit edges; max deviation {dev:.3e}")


def run_unit_stage(poly: Polygon, cfg: StageConfig, rng: np.random.Generator, **kw) -> Polygon:
    check_unit_edges(poly)
    return run_stage(poly, cfg, rng, cfg.move_weights or UNIT_WEIGHTS, **kw).best


def run_free_stage(poly: Polygon, cfg: StageConfig, rng: np.random.Generator, **kw) -> Polygon:
    return run_stage(poly, cfg, rng, cfg.move_weights or FREE_WEIGHTS, **kw).best
