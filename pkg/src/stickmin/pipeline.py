"""Staged annealing with restarts, verification and reporting."""
from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import equilateral as eqmod
from .lattice import AnnealConfig, run_lattice_chain, snap_to_lattice
from .polygon import (
    DegenerateSeed,
    InvalidPolygon,
    LatticePolygon,
    ParseError,
    Polygon,
    builtin_lattice_trefoil,
    figure_eight_seed,
    read_any_polygon,
    torus_knot_seed,
    write_polygon,
)
from .stick_anneal import FREE_WEIGHTS, UNIT_WEIGHTS, StageConfig, check_unit_edges, run_stage
from .verify import InvariantReport, KnotTypeChanged, compare_invariants, invariant_report, polygon_determinant

STAGE_ORDER = ("lattice", "unit", "free", "eq")
SNAP_DIAMETERS = (4, 5, 6, 8, 10, 12, 16, 24, 32, 48, 64)  # lattice units
SNAP_SCALES = (2, 3, 4, 6, 8)  # lattice units per median edge


class SeedError(ValueError):
    pass


class StageError(RuntimeError):
    pass


class VerificationFailed(RuntimeError):
    pass


@dataclass
class SeedSpec:
    kind: str  # "file", "torus", "trefoil" or "figure-eight"
    path: str | None = None
    p: int = 2
    q: int = 3
    samples: int | None = None


@dataclass
class PipelineConfig:
    seed: SeedSpec
    stages: tuple[str, ...] = STAGE_ORDER
    lattice: AnnealConfig = field(default_factory=lambda: AnnealConfig(max_iters=300_000))
    unit: StageConfig = field(default_factory=lambda: StageConfig(max_iters=50_000))
    free: StageConfig = field(default_factory=lambda: StageConfig(max_iters=100_000))
    eq_band: float = eqmod.DEFAULT_BAND
    eq_sweeps: int = 1000
    restarts: int = 1
    time_budget: float | None = 60.0  # seconds per restart per stage
    rng_seed: int = 0
    sample_count: int = 100
    target: int | None = None  # skip remaining restarts once reached
    threads: int | None = None  # defaults to $STICKMIN_THREADS, else 1
    out_dir: str | None = None
    report_path: str | None = None
    svg: bool = False

    def __post_init__(self):
        self.stages = tuple(self.stages)
        if not self.stages:
            raise ValueError("at least one stage is required")
        unknown = [s for s in self.stages if s not in STAGE_ORDER]
        if unknown:
            raise ValueError(f"unknown stages {unknown}")
        order = [STAGE_ORDER.index(s) for s in self.stages]
        if order != sorted(set(order)):
            raise ValueError(f"stages must follow the order {','.join(STAGE_ORDER)}")
        if self.restarts < 1:
            raise ValueError("restarts must be positive")


@dataclass
class StageResult:
    stage: str
    edges: int
    seconds: float
    iterations: int = 0

    def to_dict(self) -> dict:
        return {"stage": self.stage, "edges": self.edges, "seconds": self.seconds, "iterations": self.iterations}


@dataclass
class RestartResult:
    index: int
    seed: list[int]
    stages: list[StageResult]
    final: Polygon
    equilateral: dict | None = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "seed": self.seed,
            "stages": [s.to_dict() for s in self.stages],
            "edges": self.final.n,
        }


@dataclass
class RunReport:
    seed: str
    stages: tuple[str, ...]
    master_seed: int
    restarts: list[RestartResult]
    best_index: int
    initial: InvariantReport
    final: InvariantReport
    verdict: bool
    best: Polygon
    equilateral: dict | None = None
    polygon_path: str | None = None
    svg_path: str | None = None

    @property
    def best_edges(self) -> int:
        return self.best.n

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "stages": list(self.stages),
            "master_seed": self.master_seed,
            "best_edges": self.best_edges,
            "best_restart": self.best_index,
            "verdict": self.verdict,
            "initial_invariants": self.initial.to_dict(),
            "final_invariants": self.final.to_dict(),
            "equilateral": self.equilateral,
            "restarts": [r.to_dict() for r in self.restarts],
            "polygon_path": self.polygon_path,
            "svg_path": self.svg_path,
        }


# ------------------------------------------------------------------ seeds ---

def describe_seed(spec: SeedSpec) -> str:
    if spec.kind == "file":
        return f"file:{spec.path}"
    if spec.kind == "torus":
        return f"torus:{spec.p},{spec.q}"
    return f"builtin:{spec.kind}"


def resolve_seed(spec: SeedSpec) -> Polygon | LatticePolygon:
    try:
        if spec.kind == "file":
            return read_any_polygon(spec.path)
        if spec.kind == "torus":
            samples = spec.samples or 16 * (spec.p + spec.q)
            return torus_knot_seed(spec.p, spec.q, samples)
        if spec.kind == "trefoil":
            return builtin_lattice_trefoil()
        if spec.kind == "figure-eight":
            return figure_eight_seed(spec.samples or 200)
    except (OSError, ParseError, InvalidPolygon, DegenerateSeed, ValueError) as exc:
        raise SeedError(f"cannot build seed {describe_seed(spec)}: {exc}") from exc
    raise SeedError(f"unknown seed kind {spec.kind!r}")


def as_polygon(poly: Polygon | LatticePolygon) -> Polygon:
    return poly.to_polygon() if isinstance(poly, LatticePolygon) else poly


def lattice_seed(poly: Polygon, reference: InvariantReport, sample_count: int, verify_seed) -> LatticePolygon:
    """Snap an off-lattice seed onto the lattice, checking the fingerprint survives."""
    v = poly.vertices - poly.vertices.mean(axis=0)
    diameter = max(1e-300, float(np.ptp(v, axis=0).max()))
    median = max(1e-300, float(np.median(poly.edge_lengths())))
    # small diameters first, since a short lattice seed anneals faster
    factors = [d / diameter for d in SNAP_DIAMETERS] + [s / median for s in SNAP_SCALES]
    for factor in factors:
        try:
            lp = snap_to_lattice(v * factor)
        except InvalidPolygon:
            continue
        rep = invariant_report(lp.to_polygon(), sample_count, np.random.default_rng(verify_seed))
        if compare_invariants(reference, rep):
            return lp
    raise SeedError("could not snap the seed to the lattice without changing its invariants")


# ---------------------------------------------------------------- restarts ---

def _stage_cfg(base: StageConfig, budget: float | None, target: int | None) -> StageConfig:
    return StageConfig(
        move_weights=base.move_weights,
        p_grow=base.p_grow,
        eps=base.eps,
        max_iters=base.max_iters,
        verify_every=base.verify_every,
        time_budget=budget if base.time_budget is None else base.time_budget,
        target=target if base.target is None else base.target,
    )


def run_restart(cfg: PipelineConfig, start: Polygon | LatticePolygon, seq: np.random.SeedSequence, index: int) -> RestartResult:
    """Run every configured stage once; depends only on ``start`` and ``seq``."""
    rng = np.random.Generator(np.random.PCG64(seq))
    results: list[StageResult] = []
    poly: Polygon | LatticePolygon = start
    eq_info = None
    for stage in cfg.stages:
        t0 = time.monotonic()
        try:
            if stage == "lattice":
                lcfg = AnnealConfig(
                    p_grow=cfg.lattice.p_grow,
                    max_iters=cfg.lattice.max_iters,
                    verify_every=cfg.lattice.verify_every,
                    time_budget=cfg.lattice.time_budget if cfg.lattice.time_budget is not None else cfg.time_budget,
                    cooling=cfg.lattice.cooling,
                )
                run = run_lattice_chain(poly, lcfg, rng)
                poly, iters = run.best, run.iterations
            elif stage == "unit":
                p = as_polygon(poly)
                check_unit_edges(p)
                run = run_stage(p, _stage_cfg(cfg.unit, cfg.time_budget, cfg.target), rng, cfg.unit.move_weights or UNIT_WEIGHTS)
                poly, iters = run.best, run.iterations
            elif stage == "free":
                run = run_stage(as_polygon(poly), _stage_cfg(cfg.free, cfg.time_budget, cfg.target), rng,
                                cfg.free.move_weights or FREE_WEIGHTS)
                poly, iters = run.best, run.iterations
            else:
                poly, eq_info = _equilateralize(as_polygon(poly), cfg, rng)
                iters = 0
        except (KnotTypeChanged, InvalidPolygon, ValueError) as exc:
            raise StageError(f"restart {index}, stage {stage}: {exc}") from exc
        results.append(StageResult(stage, len(poly), time.monotonic() - t0, iters))
    return RestartResult(index, list(seq.spawn_key), results, as_polygon(poly), eq_info)


def _equilateralize(poly: Polygon, cfg: PipelineConfig, rng) -> tuple[Polygon, dict]:
    """Equalize and close; leaves the polygon unchanged if that does not converge."""
    lengths = poly.edge_lengths()
    scaled = poly.scaled(2.0 / (lengths.min() + lengths.max()))
    try:
        eq = eqmod.equalize_edges(scaled, cfg.eq_band, cfg.eq_sweeps, rng=rng)
        closed = eqmod.normalize_and_close(eq)
    except eqmod.NotConverged as exc:
        cert = eqmod.mr_certificate(exc.best) if exc.best.n >= 4 else None
        return poly, {"converged": False, "max_dev": exc.max_dev,
                      "certificate": cert.to_dict() if cert else None}
    # closure moves every vertex, so confirm the knot type before accepting it
    if polygon_determinant(closed, 0) != polygon_determinant(poly, 0):
        return poly, {"converged": False, "max_dev": eqmod.max_unit_deviation(closed),
                      "certificate": None, "knot_changed": True}
    cert = eqmod.mr_certificate(closed) if closed.n >= 4 else None
    return closed, {"converged": True, "max_dev": eqmod.max_unit_deviation(closed),
                    "certificate": cert.to_dict() if cert else None}


def thread_count(cfg: PipelineConfig) -> int:
    if cfg.threads is not None:
        return max(1, cfg.threads)
    env = os.environ.get("STICKMIN_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def run_pipeline(cfg: PipelineConfig) -> RunReport:
    """Resolve the seed, run the restarts, verify the best result and write outputs.

    Restart ``k`` draws from the ``k``-th child of ``SeedSequence(rng_seed)``;
    the invariant samples use a separate child so that both reports share
    their evaluation points.  Results are identical for any thread count
    unless a time budget cuts a stage short.
    """
    seed = resolve_seed(cfg.seed)
    root = np.random.SeedSequence(cfg.rng_seed)
    verify_seq, *restart_seqs = root.spawn(cfg.restarts + 1)
    verify_seed = verify_seq.generate_state(4)
    initial = invariant_report(as_polygon(seed), cfg.sample_count, np.random.default_rng(verify_seed))

    start = seed
    if cfg.stages[0] == "lattice" and not isinstance(seed, LatticePolygon):
        start = lattice_seed(seed, initial, cfg.sample_count, verify_seed)
    elif cfg.stages[0] == "unit":
        try:
            check_unit_edges(as_polygon(seed))
        except ValueError as exc:
            raise SeedError(str(exc)) from exc

    results: list[RestartResult] = []
    threads = min(thread_count(cfg), cfg.restarts)
    if threads == 1:
        for k, seq in enumerate(restart_seqs):
            results.append(run_restart(cfg, start, seq, k))
            if cfg.target is not None and results[-1].final.n <= cfg.target:
                break
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_restart, cfg, start, seq, k) for k, seq in enumerate(restart_seqs)]
            results = [f.result() for f in futures]

    best = min(results, key=lambda r: (r.final.n, r.index))
    final = invariant_report(best.final, cfg.sample_count, np.random.default_rng(verify_seed))
    verdict = compare_invariants(initial, final)
    report = RunReport(
        seed=describe_seed(cfg.seed),
        stages=cfg.stages,
        master_seed=cfg.rng_seed,
        restarts=results,
        best_index=best.index,
        initial=initial,
        final=final,
        verdict=verdict,
        best=best.final,
        equilateral=best.equilateral,
    )
    _write_outputs(cfg, report)
    return report


def _write_outputs(cfg: PipelineConfig, report: RunReport) -> None:
    report_path = cfg.report_path
    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        poly_path = out / "final.txt"
        write_polygon(report.best, poly_path)
        report.polygon_path = str(poly_path)
        if cfg.svg:
            from .svg import export_projection_svg

            svg_path = out / "final.svg"
            export_projection_svg(report.best, report.final.direction, svg_path)
            report.svg_path = str(svg_path)
        if report_path is None:
            report_path = str(out / "report.json")
    if report_path is not None:
        Path(report_path).parent.mkdir(parents=True, exist_ok=True)
        Path(report_path).write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
