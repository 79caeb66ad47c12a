"""Polygon types, validation, seed generators and coordinate files."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geom import closest_nonadjacent, cross, seg_seg_distance


class InvalidPolygon(ValueError):
    """A polygon breaks one of its structural invariants."""


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class DegenerateSeed(ValueError):
    """A generated seed failed validation; more samples are needed."""


class UndefinedQuantity(ValueError):
    """Raised for quantities that are vacuous on the given polygon."""


class Polygon:
    """Closed polygon in R^3; edge ``i`` joins vertex ``i`` to vertex ``i+1 mod n``."""

    __slots__ = ("vertices",)

    def __init__(self, vertices):
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3:
            raise InvalidPolygon(f"expected an (n, 3) array, got shape {v.shape}")
        if len(v) < 3:
            raise InvalidPolygon(f"a polygon needs at least 3 vertices, got {len(v)}")
        if not np.all(np.isfinite(v)):
            raise InvalidPolygon("non-finite coordinate")
        self.vertices = v

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def edge_vectors(self) -> np.ndarray:
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edge_vectors(), axis=1)

    def copy(self) -> "Polygon":
        return Polygon(self.vertices.copy())

    def scaled(self, factor: float) -> "Polygon":
        return Polygon(self.vertices * factor)

    def __eq__(self, other) -> bool:
        return isinstance(other, Polygon) and np.array_equal(self.vertices, other.vertices)

    def __repr__(self) -> str:
        return f"Polygon(n={self.n})"


@dataclass(frozen=True)
class ValidationReport:
    n: int
    min_nonadjacent_distance: float  # nan for triangles
    closest_edges: tuple[int, int] | None
    min_edge_length: float
    max_edge_length: float


def _nonadjacent_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    return i[keep], j[keep]


def nonadjacent_edge_distances(poly: Polygon) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All pairs ``(i, j)`` of edges sharing no vertex with their distances."""
    v = poly.vertices
    w = np.roll(v, -1, axis=0)
    i, j = _nonadjacent_pairs(len(v))
    return i, j, seg_seg_distance(v[i], w[i], v[j], w[j])


def closest_nonadjacent_edges(poly: Polygon) -> tuple[float, int, int]:
    """``(mu, i, j)``: the minimum non-adjacent edge distance and its 0-based edge pair."""
    if poly.n < 4:
        raise UndefinedQuantity("every pair of edges of a triangle is adjacent")
    mu, i, j = closest_nonadjacent(poly.vertices)
    return float(mu), int(i), int(j)


def min_nonadjacent_edge_distance(poly: Polygon) -> float:
    return closest_nonadjacent_edges(poly)[0]


def validate(poly: Polygon, eps: float = 0.0) -> ValidationReport:
    """Check the polygon invariants, raising :class:`InvalidPolygon` on failure.

    Non-adjacent edges must be more than ``eps`` apart (``eps = 0`` only
    demands that they be disjoint).
    """
    lengths = poly.edge_lengths()
    if np.any(lengths == 0.0):
        k = int(np.flatnonzero(lengths == 0.0)[0])
        raise InvalidPolygon(f"zero-length edge {k}")
    e = poly.edge_vectors()
    nxt = np.roll(e, -1, axis=0)
    cos = np.einsum("ij,ij->i", e, nxt) / (lengths * np.roll(lengths, -1))
    turn = np.linalg.norm(cross(e, nxt), axis=1)
    spike = (cos < 0) & (turn == 0.0)
    if np.any(spike):
        raise InvalidPolygon(f"edges {int(np.flatnonzero(spike)[0])} and its successor double back")
    if poly.n >= 4:
        mu, i, j = closest_nonadjacent_edges(poly)
        if mu <= eps:
            raise InvalidPolygon(f"non-adjacent edges {i} and {j} are {mu:.3e} apart (self-intersection)")
        pair = (i, j)
    else:
        mu, pair = math.nan, None
    return ValidationReport(poly.n, mu, pair, float(lengths.min()), float(lengths.max()))


# ---------------------------------------------------------------- lattice ---

_UNIT_STEPS = {
    (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
}


class LatticePolygon:
    """Self-avoiding closed cycle on the simple cubic lattice."""

    __slots__ = ("vertices",)

    def __init__(self, vertices):
        v = np.array(vertices)
        if v.ndim != 2 or v.shape[1] != 3:
            raise InvalidPolygon(f"expected an (n, 3) array, got shape {v.shape}")
        if not np.issubdtype(v.dtype, np.integer):
            if not np.all(v == np.round(v)):
                raise InvalidPolygon("lattice coordinates must be integers")
        self.vertices = v.astype(np.int64)
        check_lattice(self.vertices)

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def to_polygon(self) -> Polygon:
        return Polygon(self.vertices.astype(float))

    def __eq__(self, other) -> bool:
        return isinstance(other, LatticePolygon) and np.array_equal(self.vertices, other.vertices)

    def __repr__(self) -> str:
        return f"LatticePolygon(n={self.n})"


def check_lattice(vertices: np.ndarray) -> None:
    n = len(vertices)
    if n < 4 or n % 2:
        raise InvalidPolygon(f"lattice polygons have even length >= 4, got {n}")
    steps = np.roll(vertices, -1, axis=0) - vertices
    for k, s in enumerate(map(tuple, steps.tolist())):
        if s not in _UNIT_STEPS:
            raise InvalidPolygon(f"step {k} is {s}, not a unit lattice vector")
    if len({tuple(p) for p in vertices.tolist()}) != n:
        raise InvalidPolygon("lattice polygon revisits a site")


def lattice_to_polygon(lp: LatticePolygon) -> Polygon:
    return lp.to_polygon()


# Produced once by snapping a (2,3) torus curve to the lattice and shortening
# it with BFACF moves (24 edges, the lattice minimum); determinant 3.
_LATTICE_TREFOIL = [
    (1, 2, 1), (1, 1, 1), (1, 0, 1), (2, 0, 1), (3, 0, 1), (4, 0, 1),
    (4, 1, 1), (4, 2, 1), (3, 2, 1), (2, 2, 1), (2, 1, 1), (2, 1, 0),
    (1, 1, 0), (0, 1, 0), (0, 1, 1), (0, 1, 2), (1, 1, 2), (2, 1, 2),
    (3, 1, 2), (3, 1, 1), (3, 1, 0), (3, 2, 0), (2, 2, 0), (1, 2, 0),
]


def builtin_lattice_trefoil() -> LatticePolygon:
    return LatticePolygon(_LATTICE_TREFOIL)


# ------------------------------------------------------------------ seeds ---

def torus_knot_seed(p: int, q: int, samples: int) -> Polygon:
    """Sample the (p, q) curve on the standard torus (R = 2, r = 1)."""
    if math.gcd(p, q) != 1 or not (2 <= p < q):
        raise ValueError(f"need coprime 2 <= p < q, got ({p}, {q})")
    if samples < 8 * (p + q):
        raise ValueError(f"samples must be at least {8 * (p + q)}, got {samples}")
    theta = 2 * np.pi * np.arange(samples) / samples
    rad = 2.0 + np.cos(q * theta)
    poly = Polygon(np.column_stack([rad * np.cos(p * theta), rad * np.sin(p * theta), np.sin(q * theta)]))
    try:
        validate(poly)
    except InvalidPolygon as exc:
        raise DegenerateSeed(str(exc)) from exc
    return poly


def figure_eight_seed(samples: int = 120) -> Polygon:
    """Sample the curve ((2 + cos 2s) cos 3s, (2 + cos 2s) sin 3s, sin 4s)."""
    if samples < 48:
        raise ValueError("samples must be at least 48")
    s = 2 * np.pi * np.arange(samples) / samples
    rad = 2.0 + np.cos(2 * s)
    poly = Polygon(np.column_stack([rad * np.cos(3 * s), rad * np.sin(3 * s), np.sin(4 * s)]))
    try:
        validate(poly)
    except InvalidPolygon as exc:
        raise DegenerateSeed(str(exc)) from exc
    return poly


def regular_polygon(n: int, radius: float | None = None) -> Polygon:
    """Planar regular n-gon in the xy-plane; unit edges unless ``radius`` given."""
    if radius is None:
        radius = 0.5 / math.sin(math.pi / n)
    t = 2 * np.pi * np.arange(n) / n
    return Polygon(np.column_stack([radius * np.cos(t), radius * np.sin(t), np.zeros(n)]))


# ------------------------------------------------------------------- files ---

def _parse_rows(path: Path, convert):
    rows = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 3:
            raise ParseError(f"expected 3 fields, found {len(fields)}", lineno)
        try:
            rows.append([convert(f) for f in fields])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    if not rows:
        raise ParseError(f"{path}: no vertices")
    return rows


def read_polygon(path) -> Polygon:
    def real(field: str) -> float:
        x = float(field)
        if not math.isfinite(x):
            raise ValueError(f"non-finite coordinate {field!r}")
        return x

    poly = Polygon(_parse_rows(path, real))
    validate(poly)
    return poly


def write_polygon(poly: Polygon, path) -> None:
    lines = [" ".join(f"{x:.17g}" for x in row) for row in poly.vertices.tolist()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_lattice_polygon(path) -> LatticePolygon:
    return LatticePolygon(_parse_rows(path, int))


def write_lattice_polygon(lp: LatticePolygon, path) -> None:
    lines = [" ".join(str(int(x)) for x in row) for row in lp.vertices.tolist()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_any_polygon(path) -> Polygon | LatticePolygon:
    """Read a coordinate file, returning a lattice polygon when every field is an integer."""
    rows = _parse_rows(path, str)
    if all(f.lstrip("+-").isdigit() for row in rows for f in row):
        return read_lattice_polygon(path)
    return read_polygon(path)
