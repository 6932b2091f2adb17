#!/usr/bin/env python3
"""
Command-line front end: fit a CSV, run the benchmark suite, run simulations, run the exact oracle.

Reports go to stdout (human-readable, or JSON with --json); logs go to stderr.
"""
import argparse
import logging
import sys
import time
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from . import config
from .datagen import (BENCHMARK_NAMES, MIXED_BAD_ONLY, MIXED_GOOD_AND_BAD, load_benchmark,
                      read_regression_csv)
from .errors import (BudgetExceeded, DataError, DegenerateData, InvalidSettings, PtsError, RankDeficient,
                     SingularScatter, UnknownName)
from .linalg_core import Dataset
from .montecarlo import run_simulation
from .pts_core import PtsSolution, check_enumeration_budget, compute_penalties, exact_pts, fast_pts
from .schemas import (BenchmarkReport, BenchmarkRow, Design, FitReport, OracleComparison, PenaltySummary,
                      PtsConfig, SimSpec, report_json)
from .worker_pool import IterationPool

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_DATA = 2
EXIT_DEGENERATE = 3
EXIT_BUDGET = 4


def _labels(indices) -> List[int]:
    return [int(i) + 1 for i in indices]


def config_from_args(args: argparse.Namespace) -> PtsConfig:
    """Build and validate the estimator configuration from parsed flags."""
    return PtsConfig(
        cutoff_c=args.cutoff,
        alpha_greed=args.alpha,
        max_iter=args.max_iter,
        seed=args.seed,
        epsilon_floor=args.epsilon,
        t_reinclude=args.t_reinclude,
        lts_starts=args.lts_starts,
        mcd_starts=args.mcd_starts,
    )


def build_fit_report(data: Dataset, solution: PtsSolution, cfg: PtsConfig,
                     wall_seconds: Optional[float] = None) -> FitReport:
    """Report derived from a solution without re-running anything."""
    pen = solution.penalties
    values = pen.p if pen is not None else np.full(data.n, np.nan)
    scale = pen.scale if pen is not None else None
    return FitReport(
        n=data.n,
        p=data.p,
        coefficients=solution.beta.tolist(),
        sigma_hat=float(solution.sigma_hat),
        s_hat=float(scale.s_hat) if scale is not None else None,
        penalties=PenaltySummary(min=float(np.min(values)), median=float(np.median(values)),
                                 max=float(np.max(values))),
        clean=_labels(solution.clean),
        outliers=_labels(solution.outliers),
        reincluded=_labels(solution.reincluded),
        objective=float(solution.objective),
        search_objective=float(solution.search_objective) if solution.search_objective is not None else None,
        iterations=solution.iterations,
        seed=cfg.seed,
        config=cfg.model_dump(exclude={'threads'}),
        wall_seconds=wall_seconds,
    )


def cmd_fit(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    data = read_regression_csv(args.csv, add_intercept=not args.no_intercept)
    logger.info(f"Loaded {args.csv}: n={data.n}, p={data.p}")

    started = time.perf_counter()
    solution = fast_pts(data, cfg, reinclusion=not args.no_reinclusion)
    wall = time.perf_counter() - started

    report = build_fit_report(data, solution, cfg, wall if args.timings else None)
    if args.json:
        print(report_json(report))
        return EXIT_OK

    print(f"\n{'=' * 50}")
    print("PTS FIT")
    print(f"{'=' * 50}")
    print(f"Observations: {report.n}, coefficients: {report.p}")
    print(f"Coefficients: {', '.join(f'{b:.6g}' for b in report.coefficients)}")
    print(f"Robust scale: {report.sigma_hat:.6g}")
    print(f"Penalties (min/median/max): {report.penalties.min:.4g} / {report.penalties.median:.4g} / "
          f"{report.penalties.max:.4g}")
    print(f"Outliers: {report.outliers}")
    print(f"Reincluded: {report.reincluded}")
    print(f"Objective: {report.objective:.10g}")
    print(f"Time: {wall:.3f}s")
    return EXIT_OK


def benchmark_rows(cases: List[str], cfg: PtsConfig) -> List[BenchmarkRow]:
    """Run Fast-PTS on the embedded benchmarks and score the detected sets."""
    pool = IterationPool(cfg.threads)
    rows = []
    for name in cases:
        case = load_benchmark(name)
        started = time.process_time()
        solution = fast_pts(case.dataset, cfg, pool=pool)
        cpu = time.process_time() - started

        detected = set(_labels(solution.outliers))
        truth = set(int(i) for i in case.true_outliers)
        n_clean = case.dataset.n - len(truth)
        rows.append(BenchmarkRow(
            case=case.name,
            n=case.dataset.n,
            p=case.dataset.p,
            detected=sorted(detected),
            true_outliers=sorted(truth),
            identified_pct=100.0 * len(detected & truth) / len(truth),
            swamping_pct=100.0 * len(detected - truth) / n_clean if n_clean else 0.0,
            cpu_seconds=cpu,
        ))
        logger.info(f"Benchmark {case.name}: detected {sorted(detected)} in {cpu:.3f}s")
    return rows


def cmd_benchmark(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    cases = [args.case] if args.case else list(BENCHMARK_NAMES)
    rows = benchmark_rows(cases, cfg)

    if args.json:
        if not args.timings:
            rows = [row.model_copy(update={'cpu_seconds': None}) for row in rows]
        print(report_json(BenchmarkReport(seed=cfg.seed, rows=rows)))
        return EXIT_OK

    print(f"{'case':<10} {'n':>4} {'p':>3} {'%found':>7} {'%swamp':>7} {'cpu s':>7}  detected")
    for row in rows:
        print(f"{row.case:<10} {row.n:>4} {row.p:>3} {row.identified_pct:>7.1f} {row.swamping_pct:>7.1f} "
              f"{row.cpu_seconds:>7.3f}  {row.detected}")
    return EXIT_OK


SHAPE_FLAGS = ("n", "p", "contamination", "slope")


def spec_from_args(args: argparse.Namespace) -> SimSpec:
    """
    Simulation spec for the chosen design.

    Raises:
        InvalidSettings: if a design-shape flag is given for a mixed design
    """
    design = Design(args.design)
    given = {name: getattr(args, name) for name in SHAPE_FLAGS if getattr(args, name) is not None}
    if design == Design.BARRERA_YOHAI:
        return SimSpec(replications=args.reps, seed=args.seed, **given)
    if given:
        flags = ", ".join(f"--{name}" for name in given)
        raise InvalidSettings(f"{flags} not supported by the fixed {design.value} design")
    preset = MIXED_GOOD_AND_BAD if design == Design.MIXED_GOOD_BAD else MIXED_BAD_ONLY
    return preset.model_copy(update={'replications': args.reps, 'seed': args.seed})


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    spec = spec_from_args(args)
    summary = run_simulation(spec, cfg, Design(args.design))

    if args.json:
        if not args.timings:
            summary = summary.model_copy(update={'mean_cpu_seconds': None})
        print(report_json(summary))
        return EXIT_OK

    print(f"\n{'=' * 50}")
    print(f"SIMULATION ({summary.design.value})")
    print(f"{'=' * 50}")
    print(f"n={spec.n}, p={spec.p}, contamination={spec.contamination}, slope={spec.slope}, "
          f"replications={spec.replications}")
    print(f"%wrong: {summary.wrong_pct:.1f}")
    print(f"MSE: {summary.mse:.4g}")
    print(f"MSE per coefficient: {', '.join(f'{m:.4g}' for m in summary.mse_per_coefficient)}")
    print(f"Mean CPU time: {summary.mean_cpu_seconds:.3f}s")
    if summary.failures:
        print(f"Failed replications: {summary.failures}")
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    data = read_regression_csv(args.csv, add_intercept=not args.no_intercept)
    check_enumeration_budget(data.n, args.budget)

    pool = IterationPool(cfg.threads)
    pen = compute_penalties(data, cfg, pool)

    started = time.perf_counter()
    exact = exact_pts(data, pen, args.budget)
    exact_seconds = time.perf_counter() - started

    started = time.perf_counter()
    fast = fast_pts(data, cfg, penalties=pen, reinclusion=False, pool=pool)
    fast_seconds = time.perf_counter() - started

    gap = fast.objective - exact.objective
    report = OracleComparison(
        n=data.n,
        p=data.p,
        exact_objective=exact.objective,
        fast_objective=fast.objective,
        gap=gap,
        relative_gap=gap / max(abs(exact.objective), np.finfo(float).tiny),
        exact_outliers=_labels(exact.outliers),
        fast_outliers=_labels(fast.outliers),
        exact_seconds=exact_seconds if args.timings else None,
        fast_seconds=fast_seconds if args.timings else None,
    )
    if args.json:
        print(report_json(report))
        return EXIT_OK

    print(f"Exact objective: {report.exact_objective:.10g} ({exact_seconds:.3f}s)")
    print(f"Fast-PTS objective: {report.fast_objective:.10g} ({fast_seconds:.3f}s)")
    print(f"Gap: {report.gap:.3g} (relative {report.relative_gap:.3g})")
    print(f"Exact outliers: {report.exact_outliers}")
    print(f"Fast-PTS outliers: {report.fast_outliers}")
    return EXIT_OK


def _add_estimator_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--cutoff", type=float, default=config.DEFAULT_CUTOFF,
                        help=f"Penalty cut-off c (default: {config.DEFAULT_CUTOFF})")
    parser.add_argument("--alpha", type=float, default=config.DEFAULT_ALPHA_GREED,
                        help="Construction greediness, 0 = greedy (default: 0.5)")
    parser.add_argument("--max-iter", type=int, default=config.DEFAULT_MAX_ITER,
                        help=f"Fast-PTS iterations (default: {config.DEFAULT_MAX_ITER})")
    parser.add_argument("--seed", type=int, default=config.DEFAULT_SEED, help="Random seed (default: 0)")
    parser.add_argument("--epsilon", type=float, default=config.DEFAULT_EPSILON_FLOOR,
                        help="Smallest allowed penalty")
    parser.add_argument("--t-reinclude", type=float, default=config.DEFAULT_T_REINCLUDE,
                        help="Reinclusion threshold (default: 2.0)")
    parser.add_argument("--lts-starts", type=int, default=config.DEFAULT_LTS_STARTS,
                        help="Random starts for LTS")
    parser.add_argument("--mcd-starts", type=int, default=config.DEFAULT_MCD_STARTS,
                        help="Random starts for MCD")
    parser.add_argument("--json", action="store_true", help="Emit a JSON report on stdout")
    parser.add_argument("--timings", action="store_true", help="Include timings in the JSON report")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pts", description="Penalized Trimmed Squares robust regression")
    commands = parser.add_subparsers(dest="command", required=True)

    fit = commands.add_parser("fit", help="Fit a CSV file (last column is the response)")
    fit.add_argument("csv", help="Input CSV with a header row")
    fit.add_argument("--no-intercept", action="store_true", help="Do not prepend a constant column")
    fit.add_argument("--no-reinclusion", action="store_true", help="Skip the reinclusion stage")
    _add_estimator_args(fit)
    fit.set_defaults(handler=cmd_fit)

    bench = commands.add_parser("benchmark", help="Run the embedded benchmark datasets")
    bench.add_argument("--case", choices=BENCHMARK_NAMES, help="Run a single case")
    _add_estimator_args(bench)
    bench.set_defaults(handler=cmd_benchmark)

    sim = commands.add_parser("simulate", help="Monte Carlo run of a contaminated design")
    sim.add_argument("--design", choices=[d.value for d in Design], default=Design.BARRERA_YOHAI.value)
    # design-shape flags apply to the leverage design only; mixed designs are fixed presets
    sim.add_argument("--n", type=int, help="Sample size, barrera-yohai only (default: 100)")
    sim.add_argument("--p", type=int, help="Coefficients including intercept, barrera-yohai only (default: 2)")
    sim.add_argument("--contamination", type=float, help="Outlier fraction, barrera-yohai only (default: 0.1)")
    sim.add_argument("--slope", type=float, help="Outlier slope, barrera-yohai only (default: 1.0)")
    sim.add_argument("--reps", type=int, default=50, help="Replications (default: 50)")
    _add_estimator_args(sim)
    sim.set_defaults(handler=cmd_simulate)

    oracle = commands.add_parser("oracle", help="Compare Fast-PTS with exhaustive enumeration")
    oracle.add_argument("csv", help="Input CSV with a header row")
    oracle.add_argument("--no-intercept", action="store_true", help="Do not prepend a constant column")
    oracle.add_argument("--budget", type=int, default=config.PTS_ENUMERATION_BUDGET,
                        help="Largest number of subsets to enumerate")
    _add_estimator_args(oracle)
    oracle.set_defaults(handler=cmd_oracle)
    return parser


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else config.resolve_log_level(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )


def main(argv: Optional[List[str]] = None) -> int:
    """Command-line interface; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)

    try:
        return args.handler(args)
    except (DataError, UnknownName) as e:
        line = f" (line {e.line})" if getattr(e, 'line', None) else ""
        logger.error(f"Data error{line}: {e}")
        return EXIT_DATA
    except (ValidationError, InvalidSettings) as e:
        logger.error(f"Invalid settings: {e}")
        return EXIT_DATA
    except (RankDeficient, DegenerateData, SingularScatter) as e:
        logger.error(f"Degenerate design: {e}")
        return EXIT_DEGENERATE
    except BudgetExceeded as e:
        logger.error(f"Budget exceeded: {e}")
        return EXIT_BUDGET
    except PtsError as e:
        logger.error(f"Fatal error: {e}", exc_info=True)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
