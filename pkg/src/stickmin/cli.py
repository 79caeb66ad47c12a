"""Command line entry point: ``stickmin --builtin-trefoil --restarts 10 --out run/``."""
from __future__ import annotations

import argparse
import logging
import sys

from .equilateral import DEFAULT_BAND
from .geom import DEFAULT_EPS
from .lattice import AnnealConfig
from .pipeline import (
    STAGE_ORDER,
    PipelineConfig,
    RunReport,
    SeedError,
    SeedSpec,
    StageError,
    run_pipeline,
)
from .stick_anneal import StageConfig
from .svg import export_projection_svg  # noqa: F401  (re-exported)

EXIT_OK = 0
EXIT_VERIFICATION = 2
EXIT_SEED = 3
EXIT_STAGE = 4

log = logging.getLogger("stickmin")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stickmin", description="Reduce the stick number of a polygonal knot.")
    seed = ap.add_mutually_exclusive_group(required=True)
    seed.add_argument("--seed-file", metavar="PATH", help="polygon file (integer rows are read as a lattice polygon)")
    seed.add_argument("--torus", nargs=2, type=int, metavar=("P", "Q"), help="sampled (P, Q) torus knot")
    seed.add_argument("--builtin-trefoil", action="store_true", help="24-edge lattice trefoil")
    seed.add_argument("--builtin-figure-eight", action="store_true", help="sampled parametric figure-eight knot")
    ap.add_argument("--samples", type=int, default=None, help="vertices for parametric seeds")
    ap.add_argument("--stages", default=",".join(STAGE_ORDER), help="comma list from lattice,unit,free,eq")
    ap.add_argument("--restarts", type=int, default=1)
    ap.add_argument("--iters", type=int, default=None, help="iteration cap per stage")
    ap.add_argument("--time-budget", type=float, default=60.0, help="seconds per restart per stage")
    ap.add_argument("--p-grow", type=float, default=None, help="growth acceptance for the off-lattice stages")
    ap.add_argument("--lattice-p-grow", type=float, default=AnnealConfig.p_grow)
    ap.add_argument("--eps", type=float, default=DEFAULT_EPS)
    ap.add_argument("--verify-every", type=int, default=None, help="accepted moves between determinant checks")
    ap.add_argument("--eq-band", type=float, default=DEFAULT_BAND)
    ap.add_argument("--target", type=int, default=None, help="stop once this many sticks is reached")
    ap.add_argument("--rng-seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=None, help="concurrent restarts (default $STICKMIN_THREADS or 1)")
    ap.add_argument("--out", metavar="DIR", default=None, help="write final.txt and report.json here")
    ap.add_argument("--svg", action="store_true", help="also write final.svg (needs --out)")
    ap.add_argument("--report", metavar="PATH", default=None, help="JSON report path")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args: argparse.Namespace) -> PipelineConfig:
    if args.seed_file:
        seed = SeedSpec("file", path=args.seed_file)
    elif args.torus:
        seed = SeedSpec("torus", p=args.torus[0], q=args.torus[1], samples=args.samples)
    elif args.builtin_trefoil:
        seed = SeedSpec("trefoil")
    else:
        seed = SeedSpec("figure-eight", samples=args.samples)
    if args.svg and args.out is None:
        raise ValueError("--svg needs --out")

    lattice = AnnealConfig(p_grow=args.lattice_p_grow)
    stage_kw = {"eps": args.eps}
    if args.iters is not None:
        lattice.max_iters = args.iters
        stage_kw["max_iters"] = args.iters
    if args.p_grow is not None:
        stage_kw["p_grow"] = args.p_grow
    if args.verify_every is not None:
        lattice.verify_every = args.verify_every
        stage_kw["verify_every"] = args.verify_every
    defaults = PipelineConfig(seed=seed)
    unit = StageConfig(**{"max_iters": defaults.unit.max_iters, **stage_kw})
    free = StageConfig(**{"max_iters": defaults.free.max_iters, **stage_kw})
    if args.iters is None:
        lattice.max_iters = defaults.lattice.max_iters
    return PipelineConfig(
        seed=seed,
        stages=tuple(s.strip() for s in args.stages.split(",") if s.strip()),
        lattice=lattice,
        unit=unit,
        free=free,
        eq_band=args.eq_band,
        restarts=args.restarts,
        time_budget=args.time_budget,
        rng_seed=args.rng_seed,
        target=args.target,
        threads=args.threads,
        out_dir=args.out,
        report_path=args.report,
        svg=args.svg,
    )


def summarize(report: RunReport) -> str:
    lines = [f"seed {report.seed}: best {report.best_edges} edges (restart {report.best_index})"]
    best = report.restarts[[r.index for r in report.restarts].index(report.best_index)]
    for s in best.stages:
        lines.append(f"  {s.stage:<8} {s.edges:>5} edges  {s.seconds:7.2f} s")
    lines.append(f"  determinant {report.initial.determinant} -> {report.final.determinant}, "
                 f"verdict {'pass' if report.verdict else 'FAIL'}")
    if report.equilateral and report.equilateral.get("certificate"):
        c = report.equilateral["certificate"]
        lines.append(f"  equilateral: max_dev {c['max_dev']:.3e}, bound {c['bound']:.3e}, holds {c['holds']}")
    if report.polygon_path:
        lines.append(f"  polygon written to {report.polygon_path}")
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_from_args(args)
    except ValueError as exc:
        print(f"stickmin: {exc}", file=sys.stderr)
        return EXIT_SEED
    try:
        report = run_pipeline(cfg)
    except SeedError as exc:
        print(f"stickmin: {exc}", file=sys.stderr)
        return EXIT_SEED
    except StageError as exc:
        print(f"stickmin: {exc}", file=sys.stderr)
        return EXIT_STAGE
    print(summarize(report))
    if not report.verdict:
        print("stickmin: invariants changed during the run", file=sys.stderr)
        return EXIT_VERIFICATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
