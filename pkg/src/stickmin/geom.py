"""Distance routines and conservative clearance predicates.

Every predicate here is one-sided: a ``Clear`` verdict certifies that the
two primitives are farther apart than ``eps``; ``Blocked`` may be returned
spuriously for near-misses.  Nothing in the annealers relies on ``Blocked``
being exact, but a false ``Clear`` could let a move pass one strand through
another and change the knot type.

The kernels are compiled with numba and work on 3-tuples so that the inner
loops never allocate.
"""
from __future__ import annotations

import enum
import math
from typing import Iterable, Sequence

import numpy as np
from numba import njit

DEFAULT_EPS = 1e-9

# rounding slack, in units of the coordinate magnitude
ULP_SLACK = 64 * float(np.finfo(float).eps)
DEGENERATE_AREA = 1e-18


class Clearance(enum.Enum):
    CLEAR = "clear"
    BLOCKED = "blocked"

    def __bool__(self) -> bool:  # truthy means the sweep is clear
        return self is Clearance.CLEAR


# ------------------------------------------------------------ 3-vector ops ---

@njit(cache=True, nogil=True, inline="always")
def _sub(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


@njit(cache=True, nogil=True, inline="always")
def _axpy(s, x, y):
    return (s * x[0] + y[0], s * x[1] + y[1], s * x[2] + y[2])


@njit(cache=True, nogil=True, inline="always")
def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


@njit(cache=True, nogil=True, inline="always")
def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


@njit(cache=True, nogil=True, inline="always")
def _norm(a):
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


@njit(cache=True, nogil=True, inline="always")
def _row(arr, i):
    return (arr[i, 0], arr[i, 1], arr[i, 2])


@njit(cache=True, nogil=True, inline="always")
def _clamp01(x):
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


# ---------------------------------------------------------------- distances ---

@njit(cache=True, nogil=True)
def _pt_seg(x, a, b):
    d = _sub(b, a)
    dd = _dot(d, d)
    s = 0.0
    if dd > 0.0:
        s = _clamp01(_dot(_sub(x, a), d) / dd)
    return _norm(_sub(x, _axpy(s, d, a)))


@njit(cache=True, nogil=True)
def _seg_seg(p0, p1, q0, q1):
    d1 = _sub(p1, p0)
    d2 = _sub(q1, q0)
    r = _sub(p0, q0)
    a = _dot(d1, d1)
    e = _dot(d2, d2)
    b = _dot(d1, d2)
    c = _dot(d1, r)
    f = _dot(d2, r)
    s = 0.0
    t = 0.0
    if a > 0.0 and e > 0.0:
        denom = a * e - b * b
        if denom > 1e-14 * a * e:
            s = _clamp01((b * f - c * e) / denom)
        t = (b * s + f) / e
        if t < 0.0:
            t = 0.0
            s = _clamp01(-c / a)
        elif t > 1.0:
            t = 1.0
            s = _clamp01((b - c) / a)
    elif a > 0.0:
        s = _clamp01(-c / a)
    elif e > 0.0:
        t = _clamp01(f / e)
    best = _norm(_sub(_axpy(s, d1, p0), _axpy(t, d2, q0)))
    # endpoint distances keep near-parallel pairs accurate
    best = min(best, _pt_seg(p0, q0, q1))
    best = min(best, _pt_seg(p1, q0, q1))
    best = min(best, _pt_seg(q0, p0, p1))
    best = min(best, _pt_seg(q1, p0, p1))
    return best


@njit(cache=True, nogil=True)
def _tri_info(a, b, c):
    """(degenerate, unit normal, width) of a triangle; width bounds how far a
    degenerate triangle strays from the union of its edges."""
    n = _cross(_sub(b, a), _sub(c, a))
    nn = _norm(n)
    longest = max(_dot(_sub(b, a), _sub(b, a)), _dot(_sub(c, b), _sub(c, b)), _dot(_sub(a, c), _sub(a, c)))
    degenerate = 0.5 * nn < DEGENERATE_AREA or nn <= 1e-14 * longest
    width = nn / math.sqrt(longest) if longest > 0.0 else 0.0
    if degenerate:
        return True, (0.0, 0.0, 0.0), width
    return False, (n[0] / nn, n[1] / nn, n[2] / nn), width


@njit(cache=True, nogil=True)
def _pt_tri(x, a, b, c, degenerate, unit_n):
    edges = min(_pt_seg(x, a, b), _pt_seg(x, b, c), _pt_seg(x, c, a))
    if degenerate:
        return edges
    ab = _sub(b, a)
    ac = _sub(c, a)
    v = _sub(x, a)
    d00 = _dot(ab, ab)
    d01 = _dot(ab, ac)
    d11 = _dot(ac, ac)
    d20 = _dot(v, ab)
    d21 = _dot(v, ac)
    den = d00 * d11 - d01 * d01
    beta = (d11 * d20 - d01 * d21) / den
    gamma = (d00 * d21 - d01 * d20) / den
    if beta >= 0.0 and gamma >= 0.0 and beta + gamma <= 1.0:
        return min(abs(_dot(v, unit_n)), edges)
    return edges


@njit(cache=True, nogil=True)
def _seg_tri(p0, p1, a, b, c):
    degenerate, unit_n, _ = _tri_info(a, b, c)
    best = min(_seg_seg(p0, p1, a, b), _seg_seg(p0, p1, b, c), _seg_seg(p0, p1, c, a))
    if degenerate:
        return best
    best = min(best, _pt_tri(p0, a, b, c, False, unit_n))
    best = min(best, _pt_tri(p1, a, b, c, False, unit_n))
    h0 = _dot(_sub(p0, a), unit_n)
    h1 = _dot(_sub(p1, a), unit_n)
    if h0 * h1 <= 0.0 and h0 != h1:
        x = _axpy(h0 / (h0 - h1), _sub(p1, p0), p0)
        best = min(best, _pt_tri(x, a, b, c, False, unit_n))
    return best


@njit(cache=True, nogil=True)
def _wedge_gap(x, u, v):
    """Distance from the unit vector ``x`` to the planar cone spanned by u, v."""
    best = 1.0
    for w in (u, v):
        ww = _dot(w, w)
        if ww > 0.0:
            s = max(_dot(x, w) / ww, 0.0)
            best = min(best, _norm(_axpy(-s, w, x)))
    n = _cross(u, v)
    nn = _norm(n)
    if nn > 1e-14 * _norm(u) * _norm(v):
        n = (n[0] / nn, n[1] / nn, n[2] / nn)
        h = _dot(x, n)
        y = _axpy(-h, n, x)
        if _dot(_cross(u, y), n) >= 0.0 and _dot(_cross(y, v), n) >= 0.0:
            best = min(best, abs(h))
    return best


@njit(cache=True, nogil=True)
def _max_abs(arr):
    m = 0.0
    for x in arr.ravel():
        m = max(m, abs(x))
    return m


@njit(cache=True, nogil=True)
def _sweep_blocked(tris, verts, excluded, eps):
    n = verts.shape[0]
    scale = max(_max_abs(verts), _max_abs(tris), 1.0)
    slack = ULP_SLACK * scale
    for k in range(tris.shape[0]):
        corners = (_row(tris[k], 0), _row(tris[k], 1), _row(tris[k], 2))
        a, b, c = corners
        degenerate, _, width = _tri_info(a, b, c)
        tol = eps + slack + (width if degenerate else 0.0)
        # kept neighbours of excluded vertices that coincide with a corner
        anchor = np.full(n, -1)
        for j in range(n):
            if excluded[j] or not (excluded[(j - 1) % n] or excluded[(j + 1) % n]):
                continue
            pj = _row(verts, j)
            for q in range(3):
                if pj == corners[q]:
                    anchor[j] = q
        cx = (a[0] + b[0] + c[0]) / 3.0
        cy = (a[1] + b[1] + c[1]) / 3.0
        cz = (a[2] + b[2] + c[2]) / 3.0
        center = (cx, cy, cz)
        radius = max(_norm(_sub(a, center)), _norm(_sub(b, center)), _norm(_sub(c, center)))
        for s in range(n):
            e = (s + 1) % n
            if excluded[s] or excluded[e]:
                continue
            p0 = _row(verts, s)
            p1 = _row(verts, e)
            if _pt_seg(center, p0, p1) > radius + tol:
                continue
            if anchor[s] >= 0 and anchor[e] >= 0:
                return True
            if anchor[s] >= 0 or anchor[e] >= 0:
                shared, other = (s, e) if anchor[s] >= 0 else (e, s)
                q = anchor[shared]
                apex = corners[q]
                d = _sub(_row(verts, other), apex)
                dn = _norm(d)
                d = (d[0] / dn, d[1] / dn, d[2] / dn)
                gap = _wedge_gap(d, _sub(corners[(q + 1) % 3], apex), _sub(corners[(q + 2) % 3], apex))
                if gap <= eps + ULP_SLACK:
                    return True
                continue
            if _seg_tri(p0, p1, a, b, c) <= tol:
                return True
    return False


@njit(cache=True, nogil=True)
def _seg_seg_many(p0, p1, q0, q1):
    m = p0.shape[0]
    out = np.empty(m)
    for k in range(m):
        out[k] = _seg_seg(_row(p0, k), _row(p1, k), _row(q0, k), _row(q1, k))
    return out


@njit(cache=True, nogil=True)
def _pt_seg_many(x, a, b):
    m = x.shape[0]
    out = np.empty(m)
    for k in range(m):
        out[k] = _pt_seg(_row(x, k), _row(a, k), _row(b, k))
    return out


@njit(cache=True, nogil=True)
def _pt_tri_many(x, tri):
    a, b, c = _row(tri, 0), _row(tri, 1), _row(tri, 2)
    degenerate, unit_n, _ = _tri_info(a, b, c)
    out = np.empty(x.shape[0])
    for k in range(x.shape[0]):
        out[k] = _pt_tri(_row(x, k), a, b, c, degenerate, unit_n)
    return out


@njit(cache=True, nogil=True)
def _seg_tri_many(p0, p1, tri):
    a, b, c = _row(tri, 0), _row(tri, 1), _row(tri, 2)
    out = np.empty(p0.shape[0])
    for k in range(p0.shape[0]):
        out[k] = _seg_tri(_row(p0, k), _row(p1, k), a, b, c)
    return out


@njit(cache=True, nogil=True)
def _closest_nonadjacent(verts):
    n = verts.shape[0]
    best = np.inf
    bi = -1
    bj = -1
    for i in range(n):
        p0 = _row(verts, i)
        p1 = _row(verts, (i + 1) % n)
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            d = _seg_seg(p0, p1, _row(verts, j), _row(verts, (j + 1) % n))
            if d < best:
                best, bi, bj = d, i, j
    return best, bi, bj


@njit(cache=True, nogil=True)
def _edges_within(verts, edge_ids, eps):
    """True if any listed edge comes within eps of a non-adjacent edge."""
    n = verts.shape[0]
    for e in edge_ids:
        e = e % n
        p0 = _row(verts, e)
        p1 = _row(verts, (e + 1) % n)
        for j in range(n):
            if j == e or j == (e - 1) % n or j == (e + 1) % n:
                continue
            if _seg_seg(p0, p1, _row(verts, j), _row(verts, (j + 1) % n)) <= eps:
                return True
    return False


# ------------------------------------------------------------- public API ---

def _rows(*arrays):
    arrs = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in arrays))
    shape = arrs[0].shape[:-1]
    return shape, [np.ascontiguousarray(a.reshape(-1, 3)) for a in arrs]


def point_segment_distance(x, p0, p1):
    """Distance from points ``x`` to segments ``p0p1`` (broadcasting)."""
    shape, (x, p0, p1) = _rows(x, p0, p1)
    out = _pt_seg_many(x, p0, p1).reshape(shape)
    return float(out) if out.ndim == 0 else out


def seg_seg_distance(p0, p1, q0, q1):
    """Batched closest distance between segments ``p0p1`` and ``q0q1``.

    Clamped closest-parameter solve, combined with the four endpoint-to-
    segment distances so near-parallel pairs stay accurate.  Zero-length
    segments are allowed.
    """
    shape, rows = _rows(p0, p1, q0, q1)
    out = _seg_seg_many(*rows).reshape(shape)
    return float(out) if out.ndim == 0 else out


def segment_segment_distance(a: Sequence, b: Sequence) -> float:
    """Minimum distance between two closed segments ``a = (a0, a1)`` and ``b``.

    The arguments are put in a canonical order first, so the result is
    bitwise symmetric.
    """
    a = np.asarray(a, dtype=float).reshape(2, 3)
    b = np.asarray(b, dtype=float).reshape(2, 3)
    if tuple(b.ravel()) < tuple(a.ravel()):
        a, b = b, a
    return float(_seg_seg(tuple(a[0]), tuple(a[1]), tuple(b[0]), tuple(b[1])))


def point_triangle_distance(x, tri):
    """Distance from points ``x`` to a filled triangle."""
    x = np.asarray(x, dtype=float)
    out = _pt_tri_many(np.ascontiguousarray(x.reshape(-1, 3)), np.ascontiguousarray(tri, dtype=float))
    return float(out[0]) if x.ndim == 1 else out.reshape(x.shape[:-1])


def segment_triangle_distances(p0, p1, tri) -> np.ndarray:
    """Distances from each segment ``p0[k]p1[k]`` to one filled triangle."""
    p0 = np.ascontiguousarray(np.atleast_2d(np.asarray(p0, dtype=float)))
    p1 = np.ascontiguousarray(np.atleast_2d(np.asarray(p1, dtype=float)))
    return _seg_tri_many(p0, p1, np.ascontiguousarray(tri, dtype=float))


def segment_triangle_distance(seg, tri) -> float:
    seg = np.asarray(seg, dtype=float).reshape(2, 3)
    return float(segment_triangle_distances(seg[:1], seg[1:], tri)[0])


def cross(u, v) -> np.ndarray:
    """Cross product of 3-vectors or (n, 3) arrays, without np.cross overhead."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.stack([
        u[..., 1] * v[..., 2] - u[..., 2] * v[..., 1],
        u[..., 2] * v[..., 0] - u[..., 0] * v[..., 2],
        u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0],
    ], axis=-1)


def segment_triangle_clearance(seg, tri, eps: float = DEFAULT_EPS) -> Clearance:
    """Blocked when the segment comes within ``eps`` of the triangle."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    seg = np.asarray(seg, dtype=float).reshape(2, 3)
    tri = np.asarray(tri, dtype=float).reshape(3, 3)
    degenerate, _, width = _tri_info(tuple(tri[0]), tuple(tri[1]), tuple(tri[2]))
    scale = max(1.0, float(np.max(np.abs(seg))), float(np.max(np.abs(tri))))
    tol = eps + ULP_SLACK * scale + (width if degenerate else 0.0)
    d = segment_triangle_distance(seg, tri)
    return Clearance.BLOCKED if d <= tol else Clearance.CLEAR


def sweep_clearance(
    tris: Iterable,
    polygon,
    excluded_vertex_indices: Iterable[int],
    eps: float = DEFAULT_EPS,
) -> Clearance:
    """Check swept triangles against every polygon edge away from the move.

    Edges incident to an excluded vertex are skipped.  A triangle corner that
    coincides exactly with a kept neighbour of an excluded vertex is treated
    as a shared vertex: edges hanging off it touch the triangle there by
    construction, so for them only the direction of departure is tested (an
    edge leaving the shared vertex can only meet the triangle if it enters
    the triangle's corner wedge).
    """
    verts = np.ascontiguousarray(getattr(polygon, "vertices", polygon), dtype=float)
    tri_arr = np.ascontiguousarray(np.array(list(tris), dtype=float).reshape(-1, 3, 3))
    if len(tri_arr) == 0:
        return Clearance.CLEAR
    excluded = np.zeros(len(verts), dtype=np.bool_)
    for i in excluded_vertex_indices:
        excluded[int(i) % len(verts)] = True
    blocked = _sweep_blocked(tri_arr, verts, excluded, float(eps))
    return Clearance.BLOCKED if blocked else Clearance.CLEAR


def closest_nonadjacent(verts: np.ndarray) -> tuple[float, int, int]:
    return _closest_nonadjacent(np.ascontiguousarray(verts, dtype=float))


def edges_within(verts: np.ndarray, edge_ids, eps: float) -> bool:
    return bool(_edges_within(np.ascontiguousarray(verts, dtype=float), np.asarray(list(edge_ids), dtype=np.int64), float(eps)))
