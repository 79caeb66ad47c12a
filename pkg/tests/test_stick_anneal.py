from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import seg_tri_distance_oracle
from stickmin import stick_anneal as sa
from stickmin.polygon import Polygon, builtin_lattice_trefoil, regular_polygon, torus_knot_seed, validate
from stickmin.stick_anneal import (
    FREE_WEIGHTS,
    UNIT_WEIGHTS,
    MoveStatus,
    StageConfig,
    collapse_move,
    fold_move,
    grow_move,
    grow_points,
    inflate_move,
    run_free_stage,
    run_stage,
    run_unit_stage,
    shrink_apex,
    shrink_move,
)
from stickmin.verify import KnotTypeChanged

SQUARE = Polygon([(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)])
LADDER = Polygon([(0, 0, 0), (1, 0, 0), (2, 0, 0), (3, 0, 0), (3, 1, 0), (2, 1, 0), (1, 1, 0), (0, 1, 0)])


# ------------------------------------------------------------------- fold ---

def test_fold_zero_angle_is_identity():
    out = fold_move(SQUARE, 1, 0.0)
    assert out.accepted
    np.testing.assert_array_equal(out.new_polygon.vertices, SQUARE.vertices)


def test_fold_convex_quad_quarter_turn():
    quad = Polygon([(0, 0, 0), (2, 0, 0), (2, 1, 0), (0, 1.5, 0)])
    assert fold_move(quad, 1, math.pi / 4).accepted


def test_fold_square_half_turn_rejected():
    out = fold_move(SQUARE, 1, math.pi)
    assert out.status is MoveStatus.REJECTED_TRIANGLE_CHECK
    # the swept triangle reaches the opposite edge (1,1,0)-(0,1,0)
    o, a, p = SQUARE.vertices[0], SQUARE.vertices[1], SQUARE.vertices[2]
    a2 = sa.rotate_about_axis(a, o, p, math.pi)
    np.testing.assert_allclose(a2, (0, 1, 0), atol=1e-15)
    d = seg_tri_distance_oracle(*(np.array([x], dtype=float) for x in ((1, 1, 0), (0, 1, 0), o, a, a2)))
    assert d[0] < 1e-15


def test_fold_undefined_axis():
    poly = Polygon([(0, 0, 0), (1, 0, 0), (0, 0, 0), (0, 1, 0)])
    assert fold_move(poly, 1, 0.3).status is MoveStatus.REJECTED_PRECONDITION


@given(st.integers(0, 10**6), st.floats(-math.pi, math.pi))
def test_fold_preserves_incident_lengths(seed, angle):
    poly = torus_knot_seed(2, 3, 48)
    i = seed % poly.n
    out = fold_move(poly, i, angle)
    if out.accepted:
        before = poly.edge_lengths()
        after = out.new_polygon.edge_lengths()
        np.testing.assert_allclose(after, before, rtol=1e-12)
        validate(out.new_polygon, eps=1e-9)


# ----------------------------------------------------------------- shrink ---

def test_shrink_too_far_apart():
    assert shrink_move(LADDER, 1).status is MoveStatus.REJECTED_PRECONDITION


def test_shrink_apex_examples():
    c = shrink_apex(np.zeros(3), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]))
    np.testing.assert_allclose(c, (0.5, math.sqrt(3) / 2, 0), atol=1e-15)
    c = shrink_apex(np.zeros(3), np.array([2.0, 0, 0]), np.array([0, 1.0, 0]))
    np.testing.assert_array_equal(c, (1, 0, 0))


def test_shrink_needs_unit_edges():
    poly = regular_polygon(6).scaled(1.1)
    assert shrink_move(poly, 0).status is MoveStatus.REJECTED_PRECONDITION


def test_shrink_square_to_triangle():
    out = shrink_move(SQUARE, 0, 0.0)
    assert out.accepted and out.new_polygon.n == 3
    np.testing.assert_allclose(out.new_polygon.edge_lengths(), 1.0, atol=1e-12)


@pytest.mark.parametrize("i", range(8))
def test_shrink_wraps_around(i):
    hexa = regular_polygon(8)
    for angle in np.linspace(0, 2 * np.pi, 9):
        out = shrink_move(hexa, i, angle)
        if out.accepted:
            assert out.new_polygon.n == 7
            np.testing.assert_allclose(out.new_polygon.edge_lengths(), 1.0, atol=1e-12)


# ------------------------------------------------------------------- grow ---

def test_grow_points_unit_base():
    a, b = grow_points(np.zeros(3), np.array([0.5, 0.8, 0]), np.array([1.0, 0, 0]))
    np.testing.assert_allclose(a, (0, 1, 0), atol=1e-15)
    np.testing.assert_allclose(b, (1, 1, 0), atol=1e-15)


def test_grow_points_flat_boundary():
    a, b = grow_points(np.zeros(3), np.array([1.5, 0.1, 0]), np.array([3.0, 0, 0]))
    np.testing.assert_allclose(a, (1, 0, 0), atol=1e-15)
    np.testing.assert_allclose(b, (2, 0, 0), atol=1e-15)


def test_grow_collinear_and_too_far():
    assert grow_points(np.zeros(3), np.array([1.0, 0, 0]), np.array([2.0, 0, 0])) is None
    assert grow_points(np.zeros(3), np.array([1.0, 1, 0]), np.array([3.5, 0, 0])) is None
    poly = Polygon([(0, 0, 0), (1, 0, 0), (2, 0, 0), (1, 3, 0)])
    assert grow_move(poly, 1).status is MoveStatus.REJECTED_PRECONDITION


@given(st.integers(0, 10**6))
def test_grow_geometry(seed):
    rng = np.random.default_rng(seed)
    poly = Polygon(builtin_lattice_trefoil().to_polygon().vertices)
    i = int(rng.integers(poly.n))
    out = grow_move(poly, i)
    if not out.accepted:
        return
    new = out.new_polygon
    assert new.n == poly.n + 1
    np.testing.assert_allclose(new.edge_lengths(), 1.0, atol=1e-12)
    o, c, p = poly.vertices[i - 1], poly.vertices[i], poly.vertices[(i + 1) % poly.n]
    a, b = new.vertices[i], new.vertices[i + 1]
    normal = np.cross(c - o, p - o)
    normal /= np.linalg.norm(normal)
    assert abs((a - o) @ normal) < 1e-12 and abs((b - o) @ normal) < 1e-12


# --------------------------------------------------------------- collapse ---

def test_collapse_too_short():
    poly = Polygon([(0, 0, 0), (0.15, 1, 0), (0.3, 0, 0), (0.15, -1, 0)])
    assert collapse_move(poly, 1).status is MoveStatus.REJECTED_PRECONDITION


def test_collapse_collinear_vertex():
    poly = Polygon([(0, 0, 0), (1, 0, 0), (2, 0, 0), (1, 2, 0)])
    out = collapse_move(poly, 1)
    assert out.accepted and out.new_polygon.n == 3


def test_collapse_triangle_rejected():
    assert collapse_move(regular_polygon(3), 0).status is MoveStatus.REJECTED_PRECONDITION


# ---------------------------------------------------------------- inflate ---

def test_inflate_formula():
    poly = Polygon([(0, 0, 0), (1, 0, 0), (0.5, -2, 0)])
    out = inflate_move(poly, 0, (0, 0, 1), 0.5, 1.0)
    assert out.accepted and out.new_polygon.n == 4
    np.testing.assert_array_equal(out.new_polygon.vertices[1], (0.5, 0, 1))


def test_inflate_zero_height_rejected():
    poly = Polygon([(0, 0, 0), (1, 0, 0), (0.5, -2, 0)])
    assert inflate_move(poly, 0, (0, 0, 1), 0.5, 0.0).status is MoveStatus.REJECTED_PRECONDITION


def test_inflate_argument_checks():
    poly = regular_polygon(3)
    with pytest.raises(ValueError):
        inflate_move(poly, 0, (0, 0, 2), 0.5, 0.5)
    with pytest.raises(ValueError):
        inflate_move(poly, 0, (0, 0, 1), 2.0, 0.5)


def test_inflate_far_from_other_edges():
    rng = np.random.default_rng(0)
    tri = regular_polygon(3)
    edge = tri.vertices[1] - tri.vertices[0]
    for _ in range(20):
        r = sa.random_orthogonal_unit(edge, rng)
        out = inflate_move(tri, 0, r, 0.5, 0.3)
        assert out.accepted and out.new_polygon.n == 4


# ----------------------------------------------------------------- stages ---

def test_stage_config_validation():
    with pytest.raises(ValueError):
        StageConfig(p_grow=1.0)
    with pytest.raises(ValueError):
        StageConfig(eps=0.0)
    with pytest.raises(ValueError):
        StageConfig(move_weights={"fold": 0.5, "shrink": 0.2})


def test_unit_square_shrinks_to_triangle():
    best = run_unit_stage(SQUARE, StageConfig(p_grow=0.0, max_iters=2000, verify_every=0), np.random.default_rng(0))
    assert best.n == 3
    np.testing.assert_allclose(best.edge_lengths(), 1.0, atol=1e-9)


def test_unit_stage_rejects_non_unit_input():
    with pytest.raises(ValueError):
        run_unit_stage(regular_polygon(5).scaled(2.0), StageConfig(), np.random.default_rng(0))


def test_unit_stage_lattice_trefoil_pinned_seed():
    start = builtin_lattice_trefoil().to_polygon()
    run = run_stage(start, StageConfig(max_iters=20_000, verify_every=25, target=6), np.random.default_rng(0), UNIT_WEIGHTS)
    assert run.best.n <= 12
    assert run.best.n == 6
    np.testing.assert_allclose(run.best.edge_lengths(), 1.0, atol=1e-9)
    assert run.checks > 0


def test_free_stage_hexagon_to_triangle():
    best = run_free_stage(regular_polygon(6), StageConfig(p_grow=0.1, max_iters=100_000, verify_every=100, target=3),
                          np.random.default_rng(0))
    assert best.n == 3


def test_free_stage_triangle_unchanged():
    tri = regular_polygon(3)
    run = run_stage(tri, StageConfig(p_grow=0.0, max_iters=500, verify_every=0), np.random.default_rng(0), FREE_WEIGHTS)
    assert run.best is tri
    assert run.counts["collapse"]["accepted"] == 0


def test_no_growth_without_p_grow():
    seen = []

    def audit(kind, old, new):
        seen.append(new.n - old.n)
        assert new.n - old.n == sa.DELTA_N[kind]

    run_stage(torus_knot_seed(2, 3, 48), StageConfig(p_grow=0.0, max_iters=3000, verify_every=0),
              np.random.default_rng(2), FREE_WEIGHTS, on_accept=audit)
    assert seen and max(seen) <= 0


def test_knot_type_change_is_detected(monkeypatch):
    calls = iter([3, 5])
    monkeypatch.setattr(sa, "polygon_determinant", lambda poly, rng=None: next(calls))
    with pytest.raises(KnotTypeChanged):
        run_stage(torus_knot_seed(2, 3, 48), StageConfig(max_iters=1000, verify_every=1), np.random.default_rng(0), FREE_WEIGHTS)


def test_stage_reproducible():
    cfg = StageConfig(max_iters=2000, verify_every=0)
    a = run_stage(torus_knot_seed(2, 5, 96), cfg, np.random.default_rng(4), FREE_WEIGHTS)
    b = run_stage(torus_knot_seed(2, 5, 96), cfg, np.random.default_rng(4), FREE_WEIGHTS)
    assert a.best == b.best and a.counts == b.counts
