"""BFACF annealing of self-avoiding polygons on the simple cubic lattice."""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .polygon import LatticePolygon
from .verify import KnotTypeChanged, polygon_determinant


_AXES = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
# the four unit directions perpendicular to each axis
_PERP = {
    k: [d for ax in _AXES if ax != _AXES[k] for d in (ax, tuple(-c for c in ax))]
    for k in range(3)
}


def _axis_of(step) -> int:
    return 0 if step[0] else (1 if step[1] else 2)


def _add(p, d):
    return (p[0] + d[0], p[1] + d[1], p[2] + d[2])


def _sub(p, q):
    return (p[0] - q[0], p[1] - q[1], p[2] - q[2])


@dataclass(frozen=True)
class BfacfProposal:
    edge_index: int
    face_direction: tuple[int, int, int]
    delta_n: int


class Rejection(enum.Enum):
    SELF_INTERSECTION = "self-intersection"
    TOO_SMALL = "too-small"


@dataclass(frozen=True)
class BfacfOutcome:
    accepted: bool
    polygon: LatticePolygon
    reason: Rejection | None = None


def _spikes(before, a, b, after, d) -> tuple[bool, bool]:
    return before == _add(a, d), after == _add(b, d)


def _delta_n(spike_start: bool, spike_end: bool) -> int:
    return 2 - 2 * (spike_start + spike_end)


class OccupancyIndex(dict):
    """Lattice site -> vertex index of a lattice polygon."""

    @classmethod
    def of(cls, poly: LatticePolygon) -> "OccupancyIndex":
        return cls((tuple(p), k) for k, p in enumerate(poly.vertices.tolist()))


def propose_bfacf(poly: LatticePolygon, rng: np.random.Generator) -> BfacfProposal:
    """Pick an edge and one of the four faces around it, uniformly."""
    v = poly.vertices
    n = len(v)
    i = int(rng.integers(n))
    a, b = tuple(v[i].tolist()), tuple(v[(i + 1) % n].tolist())
    d = _PERP[_axis_of(_sub(b, a))][int(rng.integers(4))]
    return make_proposal(poly, i, d)


def make_proposal(poly: LatticePolygon, edge_index: int, face_direction) -> BfacfProposal:
    v = poly.vertices
    n = len(v)
    i = edge_index % n
    pts = [tuple(v[(i + k) % n].tolist()) for k in (-1, 0, 1, 2)]
    d = tuple(int(c) for c in face_direction)
    step = _sub(pts[2], pts[1])
    if sum(abs(c) for c in d) != 1 or sum(x * y for x, y in zip(step, d)) != 0:
        raise ValueError(f"face direction {d} is not a unit vector perpendicular to edge {i}")
    s0, s1 = _spikes(pts[0], pts[1], pts[2], pts[3], d)
    return BfacfProposal(i, d, _delta_n(s0, s1))


def apply_bfacf(poly: LatticePolygon, occ: OccupancyIndex | None, prop: BfacfProposal) -> BfacfOutcome:
    """Apply one BFACF move, with backtracking spikes cancelled on the spot.

    ``occ`` is not modified; pass None to have it built from ``poly``.
    """
    if occ is None:
        occ = OccupancyIndex.of(poly)
    v = poly.vertices.tolist()
    n = len(v)
    i = prop.edge_index
    d = prop.face_direction
    before, a, b, after = (tuple(v[(i + k) % n]) for k in (-1, 0, 1, 2))
    s0, s1 = _spikes(before, a, b, after, d)
    a2, b2 = _add(a, d), _add(b, d)
    ia, ib = i, (i + 1) % n

    if s0 and s1:
        if n - 2 < 4:
            return BfacfOutcome(False, poly, Rejection.TOO_SMALL)
        keep = [k for k in range(n) if k not in (ia, ib)]
        return BfacfOutcome(True, LatticePolygon([v[k] for k in keep]))
    if s0:
        if b2 in occ:
            return BfacfOutcome(False, poly, Rejection.SELF_INTERSECTION)
        v[ia] = list(b2)
        return BfacfOutcome(True, LatticePolygon(v))
    if s1:
        if a2 in occ:
            return BfacfOutcome(False, poly, Rejection.SELF_INTERSECTION)
        v[ib] = list(a2)
        return BfacfOutcome(True, LatticePolygon(v))
    if a2 in occ or b2 in occ:
        return BfacfOutcome(False, poly, Rejection.SELF_INTERSECTION)
    v[ia + 1:ia + 1] = [list(a2), list(b2)]
    return BfacfOutcome(True, LatticePolygon(v))


class LatticeChain:
    """Mutable doubly linked lattice polygon with O(1) BFACF updates."""

    def __init__(self, poly: LatticePolygon):
        pts = [tuple(p) for p in poly.vertices.tolist()]
        n = len(pts)
        self.pos = pts
        self.nxt = [(k + 1) % n for k in range(n)]
        self.prv = [(k - 1) % n for k in range(n)]
        self.occ = {p: k for k, p in enumerate(pts)}
        self.live = list(range(n))
        self.slot = list(range(n))
        self.free: list[int] = []

    def __len__(self) -> int:
        return len(self.live)

    def _new(self, p) -> int:
        if self.free:
            k = self.free.pop()
            self.pos[k] = p
        else:
            k = len(self.pos)
            self.pos.append(p)
            self.nxt.append(-1)
            self.prv.append(-1)
            self.slot.append(-1)
        self.slot[k] = len(self.live)
        self.live.append(k)
        self.occ[p] = k
        return k

    def _drop(self, k: int) -> None:
        last = self.live.pop()
        if last != k:
            s = self.slot[k]
            self.live[s] = last
            self.slot[last] = s
        del self.occ[self.pos[k]]
        self.free.append(k)

    def step(self, node: int, choice: int, accept_growth: Callable[[], bool]) -> int:
        """Attempt the move on edge ``node -> nxt[node]`` across face ``choice``.

        Returns the length change of an accepted move, or 1 (odd, so never a
        real length change) when the move is rejected.
        """
        nxt, prv, pos, occ = self.nxt, self.prv, self.pos, self.occ
        na = node
        nb = nxt[na]
        a, b = pos[na], pos[nb]
        step = (b[0] - a[0], b[1] - a[1], b[2] - a[2])
        d = _PERP[0 if step[0] else (1 if step[1] else 2)][choice]
        a2 = (a[0] + d[0], a[1] + d[1], a[2] + d[2])
        b2 = (b[0] + d[0], b[1] + d[1], b[2] + d[2])
        npa = prv[na]
        nnb = nxt[nb]
        s0 = pos[npa] == a2
        s1 = pos[nnb] == b2
        if s0 and s1:
            if len(self.live) < 6:
                return 1
            self._drop(na)
            self._drop(nb)
            nxt[npa] = nnb
            prv[nnb] = npa
            return -2
        if s0:
            if b2 in occ:
                return 1
            del occ[a]
            pos[na] = b2
            occ[b2] = na
            return 0
        if s1:
            if a2 in occ:
                return 1
            del occ[b]
            pos[nb] = a2
            occ[a2] = nb
            return 0
        if a2 in occ or b2 in occ or not accept_growth():
            return 1
        ka = self._new(a2)
        kb = self._new(b2)
        nxt[na], prv[ka] = ka, na
        nxt[ka], prv[kb] = kb, ka
        nxt[kb], prv[nb] = nb, kb
        return 2

    def polygon(self) -> LatticePolygon:
        return LatticePolygon(self.vertex_list())

    def vertex_list(self) -> list[tuple[int, int, int]]:
        start = self.live[0]
        out = [self.pos[start]]
        k = self.nxt[start]
        while k != start:
            out.append(self.pos[k])
            k = self.nxt[k]
        return out

    def check(self) -> None:
        """Full invariant audit (O(n)); raises AssertionError on violation."""
        verts = self.vertex_list()
        assert len(verts) == len(self.live) == len(self.occ), "occupancy out of sync"
        assert all(self.occ[p] is not None for p in verts)
        assert {self.occ[p] for p in verts} == set(self.live), "occupancy maps to stale nodes"
        assert len(verts) % 2 == 0 and len(verts) >= 4, "parity"
        for p, q in zip(verts, verts[1:] + verts[:1]):
            assert sum(abs(x - y) for x, y in zip(p, q)) == 1, "non-unit step"


@dataclass
class AnnealConfig:
    p_grow: float = 0.02  # must stay below the critical BFACF value (~0.046) or chains grow
    max_iters: int = 1_000_000
    verify_every: int = 10_000  # accepted moves between determinant checks; 0 disables
    time_budget: float | None = None  # seconds
    cooling: float | None = None  # multiply p_grow by this every 10^4 iterations; off by default

    def __post_init__(self):
        if not 0.0 <= self.p_grow < 1.0:
            raise ValueError("p_grow must lie in [0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


@dataclass
class LatticeRun:
    best: LatticePolygon
    iterations: int
    accepted: int
    final_length: int
    checks: int
    best_history: list[tuple[int, int]]  # (iteration, length) at each new minimum


def run_lattice_chain(
    poly: LatticePolygon,
    cfg: AnnealConfig,
    rng: np.random.Generator,
    on_accept: Callable[[LatticeChain, int], None] | None = None,
) -> LatticeRun:
    chain = LatticeChain(poly)
    det0 = polygon_determinant(poly.to_polygon(), rng) if cfg.verify_every else None
    best_n = len(chain)
    best = poly
    history = [(0, best_n)]
    accepted = 0
    checks = 0
    p_grow = cfg.p_grow
    deadline = None if cfg.time_budget is None else time.monotonic() + cfg.time_budget
    block = 4096
    it = 0
    while it < cfg.max_iters:
        m = min(block, cfg.max_iters - it)
        u_edge = rng.random(m)
        u_face = rng.integers(0, 4, size=m).tolist()
        u_acc = iter(rng.random(m).tolist())
        grow = lambda: next(u_acc) < p_grow  # noqa: E731
        live = chain.live
        for k, ue in enumerate(u_edge.tolist()):
            node = live[int(ue * len(live))]
            dn = chain.step(node, u_face[k], grow)
            if dn == 1:
                continue
            accepted += 1
            if on_accept is not None:
                on_accept(chain, dn)
            if dn < 0 and len(live) < best_n:
                best_n = len(live)
                best = chain.polygon()
                history.append((it + k + 1, best_n))
            if cfg.verify_every and accepted % cfg.verify_every == 0:
                checks += 1
                det = polygon_determinant(chain.polygon().to_polygon(), rng)
                if det != det0:
                    raise KnotTypeChanged(f"determinant {det0} became {det} after {accepted} moves")
        it += m
        if cfg.cooling is not None and it % 10_000 < m:
            p_grow *= cfg.cooling
        if deadline is not None and time.monotonic() > deadline:
            break
    return LatticeRun(best, it, accepted, len(chain), checks, history)


def anneal_lattice(poly: LatticePolygon, cfg: AnnealConfig, rng: np.random.Generator) -> LatticePolygon:
    """Shortest polygon seen during a BFACF run at fixed growth probability."""
    return run_lattice_chain(poly, cfg, rng).best


def snap_to_lattice(points: np.ndarray) -> LatticePolygon:
    """Connect rounded points of a closed curve by unit lattice steps.

    Raises InvalidPolygon if the resulting cycle is not self-avoiding; scale
    the curve up and retry in that case.
    """
    pts = [tuple(int(c) for c in p) for p in np.round(points).astype(int).tolist()]
    path = [pts[0]]
    for target in pts[1:] + pts[:1]:
        cur = list(path[-1])
        for ax in range(3):
            while cur[ax] != target[ax]:
                cur[ax] += 1 if target[ax] > cur[ax] else -1
                path.append(tuple(cur))
    path.pop()  # closing point repeats the start
    # cancel immediate backtracks
    changed = True
    while changed:
        changed = False
        out = []
        for p in path:
            if len(out) >= 2 and out[-2] == p:
                out.pop()
                changed = True
            else:
                out.append(p)
        while len(out) >= 3 and out[-1] == out[1]:
            out = out[1:-1]
            changed = True
        path = out
    return LatticePolygon(path)
