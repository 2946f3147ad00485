from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from src import __version__
from src.config import get_default_threads, get_eval_resolution, get_k_points, get_k_tmax_factor
from src.domain.schemas import (
    BandwidthMethod,
    EdgeCorrection,
    KCorrection,
    PointPattern,
    RngStream,
)
from src.io.storage import (
    build_run_dir,
    format_float,
    load_pattern,
    parse_experiment_config,
    parse_window,
    save_experiment_outputs,
    save_k_function,
    save_moments,
    save_pattern,
    save_raster,
    save_selection,
    save_table_outputs,
)
from src.logic.bandwidth import bandwidth_grid, parse_bandwidth_grid, select_bandwidth, select_campbell_with_background
from src.logic.estimator import (
    rasterize,
    subtract_background,
    theoretical_mean,
    theoretical_mise,
    theoretical_second_moment,
)
from src.logic.geometry import make_grid
from src.logic.harness import PRESET_TABLES, run_experiment, run_table
from src.logic.kernels import parse_kernel
from src.logic.simulate import MODEL_NAMES, parse_model, parse_params, product_density, simulate_model
from src.logic.summaries import estimate_k, k_function, l_function
from src.logic.validation import validate_experiment, validate_pattern


logger = logging.getLogger(__name__)

DEFAULT_WINDOW = "0 1 0 1"
DEFAULT_MOMENT_GRID = 64
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"


def _parse_args(argv: list[str]) -> argparse.Namespace:
    """Parse CLI arguments for the subcommands."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="Worker threads (0 = all CPUs)")
    common.add_argument("--verbose", action="store_true", help="Log debug output to the console")

    parser = argparse.ArgumentParser(description="Kernel intensity estimation and bandwidth selection")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    simulate = subparsers.add_parser("simulate", parents=[common], help="Simulate a point pattern.")
    simulate.add_argument("--model", required=True, choices=MODEL_NAMES)
    simulate.add_argument("--params", default="", help="Parameter pack, e.g. kappa=10,r=0.1,mu=3")
    simulate.add_argument("--window", default=DEFAULT_WINDOW, help="Bounds as 'lower upper' per axis")
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--replicate", type=int, default=0, help="Stream id of the replicate")
    simulate.add_argument("--field-resolution", type=int, default=None)
    simulate.add_argument("--out", type=Path, required=True)

    estimate = subparsers.add_parser("estimate", parents=[common], help="Rasterize a kernel intensity estimate.")
    estimate.add_argument("--pattern", type=Path, required=True)
    estimate.add_argument("--h", type=float, required=True)
    estimate.add_argument("--kernel", default="gaussian")
    estimate.add_argument("--edge", choices=[mode.value for mode in EdgeCorrection], default="local")
    estimate.add_argument("--grid", type=int, default=None, help="Evaluation nodes per axis")
    estimate.add_argument("--subtract-background", type=float, default=None)
    estimate.add_argument("--out", type=Path, required=True)

    select = subparsers.add_parser("select", parents=[common], help="Select a bandwidth.")
    select.add_argument("--pattern", type=Path, required=True)
    select.add_argument("--method", choices=[method.value for method in BandwidthMethod], required=True)
    select.add_argument("--kernel", default="gaussian")
    select.add_argument("--edge", choices=[mode.value for mode in EdgeCorrection], default="none")
    select.add_argument("--hgrid", default=None, help="Candidates as min:max:count")
    select.add_argument("--grid", type=int, default=None, help="Quadrature nodes per axis")
    select.add_argument("--background", type=float, default=None, help="Superposed background intensity")
    select.add_argument("--background-replicates", type=int, default=10)
    select.add_argument("--seed", type=int, default=0)
    select.add_argument("--out", type=Path, required=True)

    summaries = subparsers.add_parser("summaries", parents=[common], help="Estimate K or L functions.")
    summaries.add_argument("kind", choices=["k", "l"])
    summaries.add_argument("--pattern", type=Path, required=True)
    summaries.add_argument("--tmax", type=float, default=None)
    summaries.add_argument("--points", type=int, default=None)
    summaries.add_argument("--correction", choices=[mode.value for mode in KCorrection], default="translation")
    summaries.add_argument("--out", type=Path, required=True)

    moments = subparsers.add_parser("moments", parents=[common], help="Evaluate theoretical moments.")
    moments.add_argument("--model", required=True, choices=MODEL_NAMES)
    moments.add_argument("--params", default="")
    moments.add_argument("--window", default=DEFAULT_WINDOW)
    moments.add_argument("--h", type=float, required=True)
    moments.add_argument("--kernel", default="gaussian")
    moments.add_argument("--edge", choices=[mode.value for mode in EdgeCorrection], default="none")
    moments.add_argument("--at", action="append", default=None, help="Query point as comma-separated coordinates")
    moments.add_argument("--grid", type=int, default=DEFAULT_MOMENT_GRID, help="Quadrature nodes per axis")
    moments.add_argument("--mise", action="store_true", help="Add the mean integrated squared error")
    moments.add_argument("--out", type=Path, required=True)

    benchmark = subparsers.add_parser("benchmark", parents=[common], help="Run a simulation study.")
    source = benchmark.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", type=Path)
    source.add_argument("--table", choices=sorted(PRESET_TABLES))
    benchmark.add_argument("--replicates", type=int, default=100, help="Replicates per table row")
    benchmark.add_argument("--seed", type=int, default=0)
    benchmark.add_argument("--hgrid", default=None)
    benchmark.add_argument("--grid", type=int, default=None)
    benchmark.add_argument("--field-resolution", type=int, default=None)
    benchmark.add_argument("--no-progress", action="store_true")
    benchmark.add_argument("--out", type=Path, required=True)
    return parser.parse_args(argv)


def run_simulate(args: argparse.Namespace) -> None:
    """Simulate one replicate of a model and write it as CSV."""
    spec = parse_model(args.model, parse_params(args.params), parse_window(args.window))
    rng = RngStream(seed=args.seed, stream_id=args.replicate).generator()
    pattern = simulate_model(spec, rng, args.field_resolution)
    save_pattern(args.out, pattern)
    logger.info(
        "Simulated %d points (%s, seed %d, replicate %d) to %s",
        pattern.count,
        args.model,
        args.seed,
        args.replicate,
        args.out,
    )


def run_estimate(args: argparse.Namespace, threads: int) -> None:
    """Rasterize an intensity estimate for a stored pattern."""
    pattern = _load_checked_pattern(args.pattern)
    dimension = pattern.window.dimension
    grid = make_grid(pattern.window, (args.grid or get_eval_resolution(),) * dimension)
    raster = rasterize(
        pattern,
        args.h,
        parse_kernel(args.kernel, dimension),
        EdgeCorrection(args.edge),
        grid,
        threads=threads,
    )
    if args.subtract_background is not None:
        raster = subtract_background(raster, args.subtract_background)
    save_raster(args.out, raster)
    logger.info("Wrote %s raster at h=%g to %s", raster.kernel.label, args.h, args.out)


def run_select(args: argparse.Namespace, threads: int) -> None:
    """Select a bandwidth for a stored pattern and write its criterion curve."""
    pattern = _load_checked_pattern(args.pattern)
    dimension = pattern.window.dimension
    kernel = parse_kernel(args.kernel, dimension)
    correction = EdgeCorrection(args.edge)
    method = BandwidthMethod(args.method)
    candidates = parse_bandwidth_grid(args.hgrid) if args.hgrid else bandwidth_grid()
    if args.background is not None:
        if method is not BandwidthMethod.CAMPBELL:
            raise ValueError("--background is only supported with --method campbell")
        selection = select_campbell_with_background(
            pattern,
            kernel,
            correction,
            candidates,
            args.background,
            RngStream(seed=args.seed),
            args.background_replicates,
            threads=threads,
        )
    else:
        grid = make_grid(pattern.window, (args.grid,) * dimension) if args.grid else None
        selection = select_bandwidth(method, pattern, kernel, correction, candidates, grid=grid, threads=threads)
    save_selection(args.out, selection)
    sys.stdout.write(f"selected,{format_float(selection.selected_h)}\n")
    logger.info("%s selected h=%g for %s", method.value, selection.selected_h, args.pattern)


def run_summaries(args: argparse.Namespace) -> None:
    """Write the K or L function of a stored pattern on an equally spaced grid."""
    pattern = _load_checked_pattern(args.pattern)
    estimate = estimate_k(pattern, KCorrection(args.correction))
    t_max = args.tmax if args.tmax is not None else get_k_tmax_factor() * bandwidth_grid().values[-1]
    t = np.linspace(0.0, t_max, args.points or get_k_points())
    if args.kind == "k":
        save_k_function(args.out, t, k_function(estimate, t), column="khat")
    else:
        save_k_function(args.out, t, l_function(estimate, t), column="lhat")
    logger.info("Wrote %s-function with %d distances to %s", args.kind.upper(), t.size, args.out)


def run_moments(args: argparse.Namespace, threads: int) -> None:
    """Evaluate the theoretical mean, second moment and optionally the MISE of the estimator."""
    window = parse_window(args.window)
    spec = parse_model(args.model, parse_params(args.params), window)
    density = product_density(spec)
    kernel = parse_kernel(args.kernel, window.dimension)
    correction = EdgeCorrection(args.edge)
    grid = make_grid(window, (args.grid,) * window.dimension)
    centre = tuple(0.5 * (low + high) for low, high in zip(window.lower, window.upper))
    locations = [_parse_point(text, window.dimension) for text in args.at] if args.at else [np.asarray(centre)]
    results: dict[str, float] = {}
    for point in locations:
        tag = ",".join(f"{value:g}" for value in point)
        mean = theoretical_mean(point, args.h, kernel, correction, density, grid)
        second = theoretical_second_moment(point, args.h, kernel, correction, density, grid)
        results[f"mean@{tag}"] = mean
        results[f"second_moment@{tag}"] = second
        results[f"variance@{tag}"] = second - mean**2
        results[f"intensity@{tag}"] = float(density.intensity(point[None, :])[0])
    if args.mise:
        results["mise"] = theoretical_mise(args.h, kernel, correction, density, grid, threads=threads)
    save_moments(args.out, results)
    logger.info("Wrote %d moment values to %s", len(results), args.out)


def run_benchmark(args: argparse.Namespace, threads: int | None) -> None:
    """Run an experiment file or a preset table and write its outputs."""
    run_dir = build_run_dir(args.out)
    if args.config is not None:
        config = parse_experiment_config(args.config)
        if threads is not None:
            config = config.model_copy(update={"threads": threads})
        for warning in validate_experiment(config):
            logger.warning("Experiment warning: %s", warning)
        result = run_experiment(config, progress=not args.no_progress)
        save_experiment_outputs(run_dir, result, config)
        return
    results = run_table(
        args.table,
        replicates=args.replicates,
        seed=args.seed,
        bandwidths=parse_bandwidth_grid(args.hgrid) if args.hgrid else None,
        eval_resolution=args.grid,
        field_resolution=args.field_resolution,
        threads=threads,
        progress=not args.no_progress,
    )
    save_table_outputs(
        run_dir,
        args.table,
        results,
        {"table": args.table, "replicates": args.replicates, "seed": args.seed, "hgrid": args.hgrid or "default"},
    )


def main(argv: list[str] | None = None) -> int:
    """Run the command line interface and return the process exit code."""
    try:
        args = _parse_args(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    log_dir = args.out if args.command == "benchmark" else None
    _configure_logging(args.verbose, log_dir)
    threads = args.threads if args.threads is not None else get_default_threads()
    try:
        if args.command == "simulate":
            run_simulate(args)
        elif args.command == "estimate":
            run_estimate(args, threads)
        elif args.command == "select":
            run_select(args, threads)
        elif args.command == "summaries":
            run_summaries(args)
        elif args.command == "moments":
            run_moments(args, threads)
        else:
            run_benchmark(args, args.threads)
    except (ValueError, RuntimeError, OSError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        return 1
    return 0


def _configure_logging(verbose: bool, log_dir: Path | None) -> None:
    """Install the console handler and, for benchmark runs, a run.log file handler."""
    formatter = logging.Formatter(LOG_FORMAT)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.DEBUG if verbose else logging.INFO)
    console_handler.setFormatter(formatter)
    handlers: list[logging.Handler] = [console_handler]

    if log_dir is not None:
        log_dir.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_dir / "run.log")
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(formatter)
        handlers.append(file_handler)

    logging.basicConfig(level=logging.DEBUG, handlers=handlers, force=True)


def _load_checked_pattern(path: Path) -> PointPattern:
    """Load a pattern and log any validation warnings."""
    pattern = load_pattern(path)
    for warning in validate_pattern(pattern):
        logger.warning("Pattern warning (%s): %s", path, warning)
    return pattern


def _parse_point(text: str, dimension: int) -> np.ndarray:
    """Parse comma-separated coordinates into a point."""
    try:
        point = np.asarray([float(value) for value in text.split(",")], dtype=float)
    except ValueError as exc:
        raise ValueError(f"Invalid point {text!r}") from exc
    if point.size != dimension:
        raise ValueError(f"Point {text!r} needs {dimension} coordinates")
    return point


if __name__ == "__main__":
    sys.exit(main())
