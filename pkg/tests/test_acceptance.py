"""Acceptance criteria, one test each; every test logs a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` and read the "acceptance
criteria" section of the terminal summary.
"""
from __future__ import annotations

import time

import numpy as np
import pytest

from acceptance_log import record
from oracles import random_rotation, seg_tri_distance_oracle, seg_tri_sampled
from stickmin.equilateral import mr_certificate
from stickmin.geom import Clearance, segment_triangle_clearance
from stickmin.lattice import AnnealConfig, run_lattice_chain
from stickmin.pipeline import STAGE_ORDER, PipelineConfig, SeedSpec, resolve_seed, run_pipeline
from stickmin.polygon import builtin_lattice_trefoil, regular_polygon, torus_knot_seed, validate, write_polygon
from stickmin.stick_anneal import DELTA_N, FREE_WEIGHTS, UNIT_WEIGHTS, StageConfig, run_stage
from stickmin.verify import (
    NoGenericProjection,
    compare_invariants,
    invariant_report,
    magnitudes_agree,
    polygon_determinant,
    random_direction,
)

pytestmark = pytest.mark.acceptance

BATCHES = 3  # independent master seeds per stochastic criterion


# ------------------------------------------------------------ instances ---

def _near_eps_instances(rng, m, eps):
    """Segments at a known height ``h`` above a triangle's interior."""
    tri = rng.normal(size=(m, 3, 3))
    normal = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    normal /= np.linalg.norm(normal, axis=1, keepdims=True)
    w = rng.dirichlet((1, 1, 1), size=m)
    q = np.einsum("mk,mki->mi", w, tri)
    h = eps * rng.uniform(0.5, 1.5, size=m)
    h[: m // 10] = eps[: m // 10] * (1 + rng.uniform(-1e-6, 1e-6, size=m // 10))  # right at the threshold
    base = q + h[:, None] * normal
    along = rng.normal(size=(m, 3))
    along -= np.einsum("mi,mi->m", along, normal)[:, None] * normal  # parallel to the plane
    tilt = rng.random(m) < 0.5
    along[tilt] += normal[tilt] * rng.uniform(0, 1, size=(tilt.sum(), 1))  # or rising away from it
    p0 = base
    p1 = base + along
    swap = rng.random(m) < 0.5
    p0[swap], p1[swap] = p1[swap], p0[swap].copy()
    return p0, p1, tri, h


def _instances(rng):
    n_random, n_near, n_moved, n_degen, n_pierce = 40_000, 20_000, 20_000, 10_000, 10_000
    out = []  # (p0, p1, tri, eps, known exact distance or nan)

    eps_choices = np.array([1e-9, 1e-6, 1e-3, 0.1])
    p = rng.normal(size=(n_random, 5, 3)) * 10 ** rng.uniform(-1, 1, size=(n_random, 1, 1))
    eps = rng.choice(eps_choices, size=n_random)
    out.append((p[:, 0], p[:, 1], p[:, 2:], eps, np.full(n_random, np.nan)))

    eps = rng.choice(eps_choices, size=n_near)
    p0, p1, tri, h = _near_eps_instances(rng, n_near, eps)
    out.append((p0, p1, tri, eps, h))

    # rigid motions of further near-threshold instances, at varied scale
    eps = rng.choice(eps_choices[1:], size=n_moved)
    p0, p1, tri, h = _near_eps_instances(rng, n_moved, eps)
    for k in range(n_moved):
        q = random_rotation(rng)
        shift = rng.normal(size=3) * 3
        p0[k], p1[k] = q @ p0[k] + shift, q @ p1[k] + shift
        tri[k] = tri[k] @ q.T + shift
    out.append((p0, p1, tri, eps, np.full(n_moved, np.nan)))  # exact h lost to rounding

    # degenerate triangles and segments
    tri = rng.normal(size=(n_degen, 3, 3))
    kind = rng.integers(3, size=n_degen)
    t = rng.uniform(-0.5, 1.5, size=(n_degen, 1))
    tri[kind == 0, 2] = tri[kind == 0, 0] + t[kind == 0] * (tri[kind == 0, 1] - tri[kind == 0, 0])  # collinear
    tri[kind == 1, 1] = tri[kind == 1, 0]  # two corners coincide
    tri[kind == 2, 1] = tri[kind == 2, 0]
    tri[kind == 2, 2] = tri[kind == 2, 0]  # a single point
    p0 = rng.normal(size=(n_degen, 3))
    p1 = p0 + rng.normal(size=(n_degen, 3)) * (rng.random((n_degen, 1)) < 0.8)
    eps = rng.choice(eps_choices, size=n_degen)
    out.append((p0, p1, tri, eps, np.full(n_degen, np.nan)))

    # segments that pierce the triangle or end on it
    tri = rng.normal(size=(n_pierce, 3, 3))
    w = rng.dirichlet((1, 1, 1), size=n_pierce)
    q = np.einsum("mk,mki->mi", w, tri)
    d = rng.normal(size=(n_pierce, 3))
    s = rng.uniform(0, 1, size=(n_pierce, 1))
    p0, p1 = q - s * d, q + (1 - s) * d
    eps = rng.choice(eps_choices, size=n_pierce)
    out.append((p0, p1, tri, eps, np.zeros(n_pierce)))

    cat = lambda k: np.concatenate([o[k] for o in out])  # noqa: E731
    return cat(0), cat(1), cat(2), cat(3), cat(4)


# -------------------------------------------------------------- criteria ---

def test_criterion_1_predicate_soundness():
    t0 = time.monotonic()
    rng = np.random.default_rng(2024)
    p0, p1, tri, eps, known = _instances(rng)
    m = len(p0)
    clear = np.array([segment_triangle_clearance((p0[k], p1[k]), tri[k], eps[k]) is Clearance.CLEAR for k in range(m)])
    oracle = seg_tri_distance_oracle(p0, p1, tri[:, 0], tri[:, 1], tri[:, 2])
    false_clear = clear & (oracle <= eps)
    constructed = ~np.isnan(known)
    false_clear |= clear & constructed & (known <= eps)
    # dense sampling gives an upper bound, so sampled <= eps certifies a true near-contact
    sub = rng.choice(m, size=3000, replace=False)
    sampled = seg_tri_sampled(p0[sub], p1[sub], tri[sub, 0], tri[sub, 1], tri[sub, 2])
    false_clear[sub] |= clear[sub] & (sampled <= eps[sub])
    oracle_consistent = bool(np.all(oracle[sub] <= sampled + 1e-12))
    # not vacuous: constructed instances clearly above eps must come out Clear
    above = constructed & (known > eps * (1 + 1e-3))
    elapsed = time.monotonic() - t0
    ok = (m >= 100_000 and not false_clear.any() and oracle_consistent and elapsed < 60
          and bool(np.all(clear[above])))
    record(1, "predicate soundness", ok,
           f"{m} instances, {int(false_clear.sum())} false Clear, {int((~clear).sum())} Blocked, "
           f"{int(clear[above].sum())}/{int(above.sum())} near-threshold instances above eps Clear, "
           f"oracle below sampling: {oracle_consistent}, {elapsed:.1f} s (limit 60 s)")
    assert ok


def test_criterion_2_lattice_properties():
    t0 = time.monotonic()
    stats = {"accepted": 0, "dets": []}

    def audit(chain, dn):
        chain.check()  # closure, unit steps, self-avoidance, even parity
        assert dn in (-2, 0, 2)
        stats["accepted"] += 1
        if stats["accepted"] % 10_000 == 0:
            stats["dets"].append(polygon_determinant(chain.polygon().to_polygon(), stats["accepted"]))

    cfg = AnnealConfig(p_grow=0.02, max_iters=1_000_000, verify_every=0)
    run = run_lattice_chain(builtin_lattice_trefoil(), cfg, np.random.default_rng(7), audit)
    elapsed = time.monotonic() - t0
    ok = (run.iterations == 1_000_000 and run.accepted == stats["accepted"] and len(stats["dets"]) >= 1
          and set(stats["dets"]) == {3} and elapsed < 60)
    record(2, "lattice property suite", ok,
           f"{run.iterations} steps, {run.accepted} accepted moves audited, determinants {sorted(set(stats['dets']))} "
           f"at {len(stats['dets'])} checkpoints, best {run.best.n} edges, {elapsed:.1f} s (limit 60 s)")
    assert ok


def _stochastic(number, title, spec, target, budget, stages=STAGE_ORDER):
    t0 = time.monotonic()
    outcomes = []
    for batch in range(BATCHES):
        cfg = PipelineConfig(seed=spec, stages=stages, restarts=10, time_budget=budget, rng_seed=batch, target=target)
        report = run_pipeline(cfg)
        outcomes.append((report.best_edges, report.verdict, report.initial.determinant))
    passed = sum(n == target and v for n, v, _ in outcomes)
    ok = passed == BATCHES
    record(number, title, ok,
           f"target {target}; batches (edges, verdict, determinant) {outcomes}; {passed}/{BATCHES} pass, "
           f"{time.monotonic() - t0:.1f} s")
    return ok


def test_criterion_3_trefoil_end_to_end():
    assert _stochastic(3, "trefoil end-to-end", SeedSpec("trefoil"), 6, 60.0)


def test_criterion_4_figure_eight():
    seed = SeedSpec("figure-eight")
    assert polygon_determinant(resolve_seed(seed), 0) == 5
    assert _stochastic(4, "figure-eight", seed, 7, 60.0)


@pytest.mark.parametrize("q, target", [(3, 6), (5, 8), (7, 9)])
def test_criterion_5_torus_formula(q, target):
    assert (2 * (q + 1)) // 3 + 4 == target
    assert _stochastic(5, f"T({q},2) formula", SeedSpec("torus", p=2, q=q), target, 120.0)


def test_criterion_6_fixture_certificate(fixture_9_29):
    t0 = time.monotonic()
    rep = validate(fixture_9_29)
    cert = mr_certificate(fixture_9_29)
    elapsed = time.monotonic() - t0
    mu_ok = abs(cert.mu - 1.84536e-4) <= 1e-9 and rep.min_nonadjacent_distance == cert.mu
    ok = mu_ok and cert.max_dev <= 2.23e-16 and cert.holds and cert.margin_exponent >= 7.5 and elapsed < 1.0
    record(6, "9_29 fixture certificate", ok,
           f"mu {cert.mu:.6e}, max_dev {cert.max_dev:.3e}, bound {cert.bound:.3e}, holds {cert.holds}, "
           f"margin exponent {cert.margin_exponent:.2f}, {elapsed:.3f} s (limit 1 s)")
    assert ok


def test_criterion_7_invariant_stability():
    report = run_pipeline(PipelineConfig(seed=SeedSpec("trefoil"), restarts=3, target=6, rng_seed=0))
    final = report.best
    rng = np.random.default_rng(77)
    ref = invariant_report(final, rng=0)
    dets, agree, used = set(), True, 0
    while used < 50:
        d = random_direction(rng)
        try:
            rep = invariant_report(final, rng=0, direction=d)
        except NoGenericProjection:
            continue
        used += 1
        dets.add(rep.determinant)
        agree &= bool(np.all(magnitudes_agree(rep.magnitudes, ref.magnitudes, rel_tol=1e-9)))
        agree &= compare_invariants(ref, rep, rel_tol=1e-9)
    # synthetic magnitudes across the observed dynamic range
    mags = np.geomspace(1.3e-5, 2.8e2, 1000)
    same = bool(np.all(magnitudes_agree(mags, mags * (1 + 1e-12), rel_tol=1e-9)))
    differ = not bool(np.any(magnitudes_agree(mags, mags * (1 + 1e-7), rel_tol=1e-9)))
    scaled = all(np.array_equal(magnitudes_agree(mags * s, mags * s * (1 + 5e-10), rel_tol=1e-9),
                                magnitudes_agree(mags, mags * (1 + 5e-10), rel_tol=1e-9)) for s in (1e-3, 1e3))
    ok = report.best_edges == 6 and dets == {3} and agree and same and differ and scaled
    record(7, "invariant stability", ok,
           f"{used} directions on the {final.n}-stick trefoil, determinants {sorted(dets)}, magnitudes agree {agree}; "
           f"synthetic range [1.3e-5, 2.8e2]: equal {same}, distinct {differ}, scale-stable {scaled}")
    assert ok


def test_criterion_8_move_contracts():
    t0 = time.monotonic()
    stats = {"moves": 0, "by_kind": {k: 0 for k in DELTA_N}, "grew_at_zero": 0}

    def contract(unit, growth_allowed):
        def audit(kind, old, new):
            stats["moves"] += 1
            stats["by_kind"][kind] += 1
            assert new.n - old.n == DELTA_N[kind]
            if not growth_allowed and new.n > old.n:
                stats["grew_at_zero"] += 1
            validate(new, eps=1e-9)
            if unit:
                assert np.max(np.abs(new.edge_lengths() - 1.0)) <= 1e-12
            elif kind == "fold":
                np.testing.assert_allclose(np.sort(new.edge_lengths()), np.sort(old.edge_lengths()), rtol=1e-12)
        return audit

    runs = [
        (builtin_lattice_trefoil().to_polygon(), UNIT_WEIGHTS, 0.2, True),
        (torus_knot_seed(2, 5, 96), FREE_WEIGHTS, 0.3, False),
        (torus_knot_seed(2, 7, 144), FREE_WEIGHTS, 0.0, False),
        (builtin_lattice_trefoil().to_polygon(), UNIT_WEIGHTS, 0.0, True),
    ]
    seed = 0
    while stats["moves"] < 100_000:
        poly, weights, p_grow, unit = runs[seed % len(runs)]
        cfg = StageConfig(p_grow=p_grow, max_iters=20_000, verify_every=500)
        run_stage(poly, cfg, np.random.default_rng(seed), weights, on_accept=contract(unit, p_grow > 0))
        seed += 1
    elapsed = time.monotonic() - t0
    ok = stats["grew_at_zero"] == 0 and elapsed < 120
    record(8, "move-contract suite", ok,
           f"{stats['moves']} accepted moves {stats['by_kind']}, growth at p_grow=0: {stats['grew_at_zero']}, "
           f"{elapsed:.1f} s (limit 120 s)")
    assert ok


def test_criterion_9_unknot_sanity(tmp_path):
    path = tmp_path / "hexagon.txt"
    write_polygon(regular_polygon(6), path)
    cfg = PipelineConfig(seed=SeedSpec("file", path=str(path)), stages=("free",),
                         free=StageConfig(p_grow=0.1, max_iters=100_000), target=3, rng_seed=0)
    report = run_pipeline(cfg)
    iters = report.restarts[0].stages[0].iterations
    ok = report.best_edges == 3 and report.verdict and iters <= 100_000
    record(9, "unknot sanity", ok,
           f"hexagon -> {report.best_edges} sticks in {iters} iterations, determinant "
           f"{report.initial.determinant} -> {report.final.determinant}, verdict {report.verdict}")
    assert ok
