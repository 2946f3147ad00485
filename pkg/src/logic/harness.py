from __future__ import annotations

"""Simulation study: replicate, select, estimate, score and tabulate."""

import math
from typing import Callable, Sequence

from joblib import Parallel, delayed  # type: ignore[import-untyped]
import numpy as np
import pandas as pd
from toolz import concat, groupby  # type: ignore[import-untyped]
from tqdm import tqdm

from src.config import get_eval_resolution, get_field_resolution, resolve_threads
from src.domain.errors import InsufficientPointsError, NoAdmissibleBandwidthError
from src.domain.schemas import (
    BandwidthGrid,
    BandwidthMethod,
    EdgeCorrection,
    ExperimentConfig,
    ExperimentResult,
    Grid,
    IntensityRaster,
    KernelFamily,
    KernelSpec,
    LogGaussianCox,
    MaternCluster,
    ModelSpec,
    PoissonHomogeneous,
    PoissonLinear,
    PoissonModulated,
    ReplicateOutcome,
    RngStream,
    Window,
)
from src.logic.bandwidth import bandwidth_grid, select_bandwidth
from src.logic.estimator import rasterize
from src.logic.geometry import make_grid
from src.logic.simulate import expected_count, simulate_model, true_intensity

import logging

logger = logging.getLogger(__name__)

IntensityFunction = Callable[[np.ndarray], np.ndarray]

MISSING_CELL = "NA"
TABLE_COLUMNS: tuple[tuple[BandwidthMethod, str], ...] = (
    (BandwidthMethod.CAMPBELL, "New"),
    (BandwidthMethod.DIGGLE, "State"),
    (BandwidthMethod.PPL, "Likelihood"),
)
UNIT_SQUARE = Window(lower=(0.0, 0.0), upper=(1.0, 1.0))

PRESET_TABLES: dict[str, list[tuple[str, object]]] = {
    "poisson": [
        (f"lambda = {level:g}", PoissonHomogeneous(intensity=level)) for level in (10.0, 50.0, 250.0)
    ],
    "poisson-linear": [
        (f"alpha = {slope:g}", PoissonLinear(base=10.0, slope=slope)) for slope in (1.0, 80.0, 480.0)
    ],
    "poisson-modulated": [
        (f"(alpha, beta) = ({level:g}, {amplitude:g})", PoissonModulated(level=level, amplitude=amplitude))
        for level, amplitude in ((10.0, 2.0), (50.0, 20.0), (250.0, 100.0))
    ],
    "matern": [
        (
            f"(kappa, r, mu) = ({kappa:g}, {radius:g}, {mu:g})",
            MaternCluster(parent_intensity=kappa, radius=radius, mean_offspring=mu),
        )
        for kappa in (10.0, 20.0)
        for mu in (3.0, 10.0)
        for radius in (0.05, 0.1)
    ],
    "lgcp": [
        (
            f"(lambda, sigma2, beta) = ({level:g}, 2log({base}), {decay:g})",
            LogGaussianCox(trend=PoissonHomogeneous(intensity=level), variance=2.0 * math.log(base), decay=decay),
        )
        for level in (10.0, 50.0)
        for base, decay in ((5, 50.0), (2, 10.0), (5, 10.0))
    ],
    "lgcp-linear": [
        (
            f"(sigma2, beta) = (2log({base}), {decay:g})",
            LogGaussianCox(trend=PoissonLinear(base=10.0, slope=80.0), variance=2.0 * math.log(base), decay=decay),
        )
        for base, decay in ((5, 50.0), (2, 10.0), (5, 10.0))
    ],
    "lgcp-modulated": [
        (
            f"(sigma2, beta) = (2log({base}), {decay:g})",
            LogGaussianCox(
                trend=PoissonModulated(level=10.0, amplitude=2.0), variance=2.0 * math.log(base), decay=decay
            ),
        )
        for base, decay in ((5, 50.0), (2, 10.0), (5, 10.0))
    ],
}


def integrated_squared_error(raster: IntensityRaster, truth: IntensityFunction) -> float:
    """Return the midpoint-rule integral of (estimate - truth)^2 over the raster's window."""
    residual = raster.values - np.asarray(truth(raster.grid.nodes), dtype=float)
    return float(np.sum(residual * residual) * raster.grid.cell_volume)


def run_experiment(config: ExperimentConfig, progress: bool = True) -> ExperimentResult:
    """Run the replicate loop for one model and aggregate normalised ISE per method.

    Args:
        config (ExperimentConfig): Experiment definition.
        progress (bool): Show a progress bar on stderr.

    Returns:
        ExperimentResult: Per-replicate rows and normalised averages.
    """
    spec = config.model
    truth = true_intensity(spec)
    expected = expected_count(spec)
    grid = make_grid(spec.window, config.eval_resolution)
    workers = resolve_threads(config.threads)
    logger.info(
        "Running %s: %d replicates, %d bandwidths, methods %s, %d workers",
        config.label or spec.model.kind,
        config.replicates,
        len(config.bandwidth_grid.values),
        ",".join(method.value for method in config.methods),
        workers,
    )

    def replicate(index: int) -> list[ReplicateOutcome]:
        return _run_replicate(index, config, grid, truth)

    # Results come back in replicate order whatever the worker count.
    outcomes = Parallel(n_jobs=workers, prefer="threads", return_as="generator")(
        delayed(replicate)(index) for index in range(config.replicates)
    )
    batches = list(
        tqdm(
            outcomes,
            total=config.replicates,
            desc=config.label or spec.model.kind,
            unit="rep",
            leave=False,
            disable=not progress,
        )
    )
    rows = tuple(concat(batches))
    by_method = groupby(lambda row: row.method, rows)
    averages: dict[BandwidthMethod, float | None] = {}
    failures: dict[BandwidthMethod, int] = {}
    for method in config.methods:
        scored = [row.ise for row in by_method.get(method, []) if row.ise is not None]
        failures[method] = sum(1 for row in by_method.get(method, []) if row.failure is not None)
        averages[method] = float(np.mean(scored)) / expected if scored else None
    logger.info(
        "Finished %s: %s",
        config.label or spec.model.kind,
        ", ".join(f"{method.value}={_format_cell(averages[method])}" for method in config.methods),
    )
    return ExperimentResult(
        label=config.label,
        expected_count=expected,
        rows=rows,
        normalized_average_ise=averages,
        failures=failures,
    )


def _run_replicate(
    index: int,
    config: ExperimentConfig,
    grid: Grid,
    truth: IntensityFunction,
) -> list[ReplicateOutcome]:
    """Simulate one replicate and score every requested method on it."""
    rng = RngStream(seed=config.seed, stream_id=index).generator()
    pattern = simulate_model(config.model, rng, config.field_resolution)
    outcomes = []
    for method in config.methods:
        try:
            selection = select_bandwidth(
                method,
                pattern,
                config.selection_kernel,
                config.selection_edge,
                config.bandwidth_grid,
                grid=grid,
                threads=1,
            )
        except (InsufficientPointsError, NoAdmissibleBandwidthError) as exc:
            logger.warning("Replicate %d skipped for %s: %s", index, method.value, exc)
            outcomes.append(
                ReplicateOutcome(replicate=index, method=method, point_count=pattern.count, failure=str(exc))
            )
            continue
        raster = rasterize(pattern, selection.selected_h, config.final_kernel, config.final_edge, grid, threads=1)
        outcomes.append(
            ReplicateOutcome(
                replicate=index,
                method=method,
                point_count=pattern.count,
                selected_h=selection.selected_h,
                ise=integrated_squared_error(raster, truth),
            )
        )
    return outcomes


def table_frame(results: Sequence[ExperimentResult], labels: Sequence[str] | None = None) -> pd.DataFrame:
    """Arrange normalised averages as rows per setting and columns New, State, Likelihood.

    Args:
        results (Sequence[ExperimentResult]): Results in row order.
        labels (Sequence[str] | None): Row labels, defaulting to each result's label.

    Returns:
        pd.DataFrame: Table with missing methods left as NaN.
    """
    names = list(labels) if labels is not None else [result.label for result in results]
    if len(names) != len(results):
        raise ValueError("Table labels must match the number of results")
    records = [
        {column: result.normalized_average_ise.get(method) for method, column in TABLE_COLUMNS}
        for result in results
    ]
    frame = pd.DataFrame.from_records(records, columns=[column for _, column in TABLE_COLUMNS])
    frame.index = pd.Index(names, name="setting")
    return frame.astype(float)


def emit_table(results: Sequence[ExperimentResult], labels: Sequence[str] | None = None) -> str:
    """Render a results table as CSV text, writing NA for methods that were not run."""
    return table_frame(results, labels).to_csv(na_rep=MISSING_CELL, float_format="%.1f", lineterminator="\n")


def result_frame(result: ExperimentResult) -> pd.DataFrame:
    """Return per-replicate rows as a DataFrame."""
    return pd.DataFrame.from_records(
        [
            {
                "replicate": row.replicate,
                "method": row.method.value,
                "point_count": row.point_count,
                "selected_h": row.selected_h,
                "ise": row.ise,
                "failure": row.failure,
            }
            for row in result.rows
        ],
        columns=["replicate", "method", "point_count", "selected_h", "ise", "failure"],
    )


def benchmark_settings(table: str, window: Window = UNIT_SQUARE) -> list[tuple[str, ModelSpec]]:
    """Return labelled model settings of a preset table.

    Args:
        table (str): One of the PRESET_TABLES keys.
        window (Window): Observation window.

    Returns:
        list[tuple[str, ModelSpec]]: Row labels with their models.
    """
    if table not in PRESET_TABLES:
        raise ValueError(f"Unknown table {table!r}; expected one of {', '.join(PRESET_TABLES)}")
    return [
        (label, ModelSpec.model_validate({"model": model, "window": window}))
        for label, model in PRESET_TABLES[table]
    ]


def table_config(
    label: str,
    spec: ModelSpec,
    replicates: int = 100,
    seed: int = 0,
    bandwidths: BandwidthGrid | None = None,
    eval_resolution: int | None = None,
    field_resolution: int | None = None,
    methods: Sequence[BandwidthMethod] | None = None,
    threads: int | None = None,
) -> ExperimentConfig:
    """Build the standard experiment for one table row.

    Selection uses the Gaussian kernel without edge correction; the scored
    estimate uses the Gaussian kernel with local correction.
    """
    per_axis = eval_resolution or get_eval_resolution()
    return ExperimentConfig(
        model=spec,
        replicates=replicates,
        bandwidth_grid=bandwidths or bandwidth_grid(),
        eval_resolution=(per_axis,) * spec.window.dimension,
        selection_kernel=KernelSpec(family=KernelFamily.GAUSSIAN, dimension=spec.window.dimension),
        selection_edge=EdgeCorrection.NONE,
        methods=tuple(methods) if methods else tuple(method for method, _ in TABLE_COLUMNS),
        seed=seed,
        field_resolution=field_resolution or get_field_resolution(),
        threads=threads or 0,
        label=label,
    )


def run_table(
    table: str,
    replicates: int = 100,
    seed: int = 0,
    bandwidths: BandwidthGrid | None = None,
    eval_resolution: int | None = None,
    field_resolution: int | None = None,
    methods: Sequence[BandwidthMethod] | None = None,
    threads: int | None = None,
    progress: bool = True,
) -> list[ExperimentResult]:
    """Run every setting of a preset table with the standard protocol.

    Args:
        table (str): Preset table name.
        replicates (int): Replicates per setting.
        seed (int): Base seed shared by all settings.
        bandwidths (BandwidthGrid | None): Candidates, defaulting to the configured grid.
        eval_resolution (int | None): Evaluation grid nodes per axis.
        field_resolution (int | None): LGCP field grid nodes per axis.
        methods (Sequence[BandwidthMethod] | None): Methods to run, all by default.
        threads (int | None): Worker count.
        progress (bool): Show progress bars.

    Returns:
        list[ExperimentResult]: One result per table row.
    """
    candidates = bandwidths or bandwidth_grid()
    return [
        run_experiment(
            table_config(
                label,
                spec,
                replicates=replicates,
                seed=seed,
                bandwidths=candidates,
                eval_resolution=eval_resolution,
                field_resolution=field_resolution,
                methods=methods,
                threads=threads,
            ),
            progress=progress,
        )
        for label, spec in benchmark_settings(table)
    ]


def _format_cell(value: float | None) -> str:
    return MISSING_CELL if value is None else f"{value:.1f}"
