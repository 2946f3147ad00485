from __future__ import annotations

"""Bandwidth selection: Campbell criterion, Poisson likelihood cross-validation and Diggle's MSE criterion."""

import math
from functools import partial
from typing import Callable, Sequence

from joblib import Parallel, delayed  # type: ignore[import-untyped]
import numpy as np

from src.config import get_bandwidth_grid_spec, get_eval_resolution, get_lgcp_safety, resolve_threads
from src.domain.errors import InsufficientPointsError, NoAdmissibleBandwidthError
from src.domain.schemas import (
    ArgKind,
    BandwidthGrid,
    BandwidthMethod,
    BandwidthSelection,
    EdgeCorrection,
    Grid,
    KCorrection,
    KEstimate,
    KernelSpec,
    PointPattern,
    RngStream,
    Window,
)
from src.logic.estimator import (
    estimate_many,
    integrated_mass,
    leave_one_out_at_points,
    rasterize,
)
from src.logic.geometry import make_grid, superpose
from src.logic.kernels import window_mass
from src.logic.simulate import simulate_poisson
from src.logic.summaries import estimate_k, k_function, k_range, lens_area, stieltjes_integral

import logging

logger = logging.getLogger(__name__)

IntensityFunction = Callable[[np.ndarray], np.ndarray]

ARGKIND_BY_METHOD = {
    BandwidthMethod.CAMPBELL: ArgKind.MIN,
    BandwidthMethod.DIGGLE: ArgKind.MIN,
    BandwidthMethod.PPL: ArgKind.MAX,
}


def bandwidth_grid(h_min: float | None = None, h_max: float | None = None, count: int | None = None) -> BandwidthGrid:
    """Return equally spaced candidate bandwidths, defaulting to the configured range.

    Args:
        h_min (float | None): Smallest candidate.
        h_max (float | None): Largest candidate.
        count (int | None): Number of candidates.

    Returns:
        BandwidthGrid: Strictly increasing candidates.
    """
    default_min, default_max, default_count = get_bandwidth_grid_spec()
    low = default_min if h_min is None else h_min
    high = default_max if h_max is None else h_max
    size = default_count if count is None else count
    if size < 1:
        raise ValueError(f"Bandwidth grid needs at least one value, got {size}")
    values = np.linspace(low, high, size) if size > 1 else np.asarray([low])
    return BandwidthGrid(values=tuple(float(value) for value in values))


def parse_bandwidth_grid(text: str) -> BandwidthGrid:
    """Parse ``min:max:count`` into a bandwidth grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"Bandwidth grid {text!r} must look like min:max:count")
    try:
        return bandwidth_grid(float(parts[0]), float(parts[1]), int(parts[2]))
    except ValueError as exc:
        raise ValueError(f"Invalid bandwidth grid {text!r}: {exc}") from exc


def grid_optimum(curve: np.ndarray, argkind: ArgKind) -> int:
    """Return the index of the optimum, preferring the smallest bandwidth on ties.

    Args:
        curve (np.ndarray): Criterion values in increasing bandwidth order.
        argkind (ArgKind): Whether the criterion is minimised or maximised.

    Returns:
        int: Index of the first optimal finite value, or 0 when none is finite.
    """
    values = np.asarray(curve, dtype=float)
    finite = np.isfinite(values)
    if not np.any(finite):
        return 0
    if argkind is ArgKind.MIN:
        return int(np.argmin(np.where(finite, values, np.inf)))
    return int(np.argmax(np.where(finite, values, -np.inf)))


def campbell_t(h: float, pattern: PointPattern, kernel: KernelSpec, correction: EdgeCorrection) -> float:
    """Sum the reciprocal intensity estimates at the data points.

    The estimate includes the point itself. An empty pattern gives the window
    volume, and a zero estimate at any point gives infinity.
    """
    if h <= 0.0:
        raise ValueError(f"Bandwidth must be positive, got {h}")
    if pattern.count == 0:
        return pattern.window.volume
    estimates = estimate_many(pattern.points, h, pattern, kernel, correction)
    if np.any(estimates <= 0.0):
        return math.inf
    return float(np.sum(1.0 / estimates))


def campbell_criterion(h: float, pattern: PointPattern, kernel: KernelSpec, correction: EdgeCorrection) -> float:
    """Return the squared gap between the reciprocal sum and the window volume."""
    return (campbell_t(h, pattern, kernel, correction) - pattern.window.volume) ** 2


def select_campbell(
    pattern: PointPattern,
    kernel: KernelSpec,
    correction: EdgeCorrection,
    bandwidths: BandwidthGrid,
    threads: int | None = None,
) -> BandwidthSelection:
    """Choose the bandwidth minimising the Campbell criterion.

    Args:
        pattern (PointPattern): Observed pattern, possibly empty.
        kernel (KernelSpec): Smoothing kernel.
        correction (EdgeCorrection): Edge-correction mode.
        bandwidths (BandwidthGrid): Candidates.
        threads (int | None): Worker count for the scan.

    Returns:
        BandwidthSelection: Selected bandwidth and the full curve.
    """
    criterion = partial(campbell_criterion, pattern=pattern, kernel=kernel, correction=correction)
    curve = _scan(criterion, bandwidths.values, threads)
    return _selection(BandwidthMethod.CAMPBELL, bandwidths, curve)


def ppl_criterion(
    h: float,
    pattern: PointPattern,
    kernel: KernelSpec,
    correction: EdgeCorrection,
    grid: Grid | None = None,
) -> float:
    """Return the leave-one-out Poisson log-likelihood of a bandwidth.

    Args:
        h (float): Bandwidth.
        pattern (PointPattern): Pattern with at least two points.
        kernel (KernelSpec): Smoothing kernel.
        correction (EdgeCorrection): Edge-correction mode.
        grid (Grid | None): Quadrature grid for the integral under global correction.

    Returns:
        float: Log-likelihood, or -inf when any leave-one-out estimate vanishes.
    """
    if pattern.count < 2:
        raise InsufficientPointsError(f"Likelihood cross-validation needs two points, got {pattern.count}")
    leave_one_out = leave_one_out_at_points(h, pattern, kernel, correction)
    if np.any(leave_one_out <= 0.0):
        return -math.inf
    log_sum = float(np.sum(np.log(leave_one_out)))
    if correction is EdgeCorrection.LOCAL:
        # Mass preservation makes the integral equal to the point count.
        return log_sum - pattern.count
    if correction is EdgeCorrection.NONE:
        # Without correction each point contributes exactly its window mass.
        return log_sum - float(np.sum(window_mass(kernel, pattern.points, h, pattern.window)))
    quadrature = grid or make_grid(pattern.window, (get_eval_resolution(),) * pattern.window.dimension)
    return log_sum - integrated_mass(rasterize(pattern, h, kernel, correction, quadrature, threads=1))


def select_ppl(
    pattern: PointPattern,
    kernel: KernelSpec,
    bandwidths: BandwidthGrid,
    correction: EdgeCorrection = EdgeCorrection.NONE,
    grid: Grid | None = None,
    threads: int | None = None,
) -> BandwidthSelection:
    """Choose the bandwidth maximising the likelihood cross-validation criterion.

    Args:
        pattern (PointPattern): Pattern with at least two points.
        kernel (KernelSpec): Smoothing kernel.
        bandwidths (BandwidthGrid): Candidates.
        correction (EdgeCorrection): Edge-correction mode, none by default.
        grid (Grid | None): Quadrature grid for the global-correction integral.
        threads (int | None): Worker count for the scan.

    Returns:
        BandwidthSelection: Selected bandwidth and the full curve.
    """
    if pattern.count < 2:
        raise InsufficientPointsError(f"Likelihood cross-validation needs two points, got {pattern.count}")
    criterion = partial(ppl_criterion, pattern=pattern, kernel=kernel, correction=correction, grid=grid)
    curve = _scan(criterion, bandwidths.values, threads)
    if not np.any(np.isfinite(curve)):
        raise NoAdmissibleBandwidthError("No admissible bandwidth: every likelihood value is -inf")
    return _selection(BandwidthMethod.PPL, bandwidths, curve)


def diggle_criterion(h: float, estimate: KEstimate, lambda_hat: float) -> float:
    """Return Diggle's mean squared error criterion for a bandwidth.

    The unknown h-independent term is replaced by lambda_hat^2, so a Poisson
    K-function gives exactly lambda_hat / (pi h^2).

    Args:
        h (float): Bandwidth.
        estimate (KEstimate): Atoms of the K-function estimate.
        lambda_hat (float): Intensity estimate.

    Returns:
        float: Criterion value.
    """
    if h <= 0.0:
        raise ValueError(f"Bandwidth must be positive, got {h}")
    disc = math.pi * h * h
    lens_term = stieltjes_integral(estimate, partial(lens_area, h=h), 2.0 * h)
    k_at_h = float(k_function(estimate, h))
    return (
        lambda_hat**2 * lens_term / disc**2
        + lambda_hat / disc * (1.0 - 2.0 * lambda_hat * k_at_h)
        + lambda_hat**2
    )


def select_diggle(
    pattern: PointPattern,
    bandwidths: BandwidthGrid,
    correction: KCorrection = KCorrection.TRANSLATION,
    threads: int | None = None,
    k_max: float | None = None,
) -> BandwidthSelection:
    """Choose the bandwidth minimising Diggle's criterion with lambda_hat = n / |W|.

    Only bandwidths with 2h within the K-function range are admissible; the
    others get an infinite criterion value.

    Args:
        pattern (PointPattern): Pattern with at least two points.
        bandwidths (BandwidthGrid): Candidates.
        correction (KCorrection): Edge correction of the K-function estimate.
        threads (int | None): Worker count for the scan.
        k_max (float | None): K-function range; the window rule from k_range when None.

    Returns:
        BandwidthSelection: Selected bandwidth and the full curve.
    """
    if pattern.count < 2:
        raise InsufficientPointsError(f"Diggle's criterion needs two points, got {pattern.count}")
    estimate = estimate_k(pattern, correction)
    k_max = k_range(pattern.window, estimate.intensity_estimate) if k_max is None else k_max
    admissible = 2.0 * np.asarray(bandwidths.values) <= k_max * (1.0 + 1e-12)
    if not np.any(admissible):
        raise NoAdmissibleBandwidthError(
            f"No admissible bandwidth: the smallest candidate {bandwidths.values[0]:g} exceeds half the K range {k_max:g}"
        )
    criterion = partial(diggle_criterion, estimate=estimate, lambda_hat=estimate.intensity_estimate)
    curve = np.full(admissible.size, np.inf)
    curve[admissible] = _scan(criterion, [h for h, keep in zip(bandwidths.values, admissible) if keep], threads)
    logger.debug("Diggle scan limited to h <= %.4g of %.4g", k_max / 2.0, bandwidths.values[-1])
    return _selection(BandwidthMethod.DIGGLE, bandwidths, curve)


def select_campbell_with_background(
    pattern: PointPattern,
    kernel: KernelSpec,
    correction: EdgeCorrection,
    bandwidths: BandwidthGrid,
    background: float | IntensityFunction,
    stream: RngStream,
    replicates: int,
    threads: int | None = None,
    background_max: float | None = None,
) -> BandwidthSelection:
    """Select a Campbell bandwidth after superposing simulated Poisson background patterns.

    Each replicate adds an independent Poisson pattern of the known background
    intensity; the returned curve is the replicate average. A background
    function must be strictly positive on the evaluation grid of the window.

    Args:
        pattern (PointPattern): Observed pattern.
        kernel (KernelSpec): Smoothing kernel.
        correction (EdgeCorrection): Edge-correction mode.
        bandwidths (BandwidthGrid): Candidates.
        background (float | IntensityFunction): Positive constant or intensity function.
        stream (RngStream): Random stream; replicate r uses substream r.
        replicates (int): Number of background patterns.
        threads (int | None): Worker count for each scan.
        background_max (float | None): Upper bound of a background function;
            the grid maximum times the thinning margin when None.

    Returns:
        BandwidthSelection: Selection on the averaged curve.
    """
    if replicates < 1:
        raise ValueError(f"At least one background replicate is required, got {replicates}")
    bound = _background_bound(background, pattern.window, background_max)
    curves = []
    for replicate in range(replicates):
        noise = simulate_poisson(background, pattern.window, bound, stream.generator(replicate))
        combined = superpose(pattern, noise)
        criterion = partial(campbell_criterion, pattern=combined, kernel=kernel, correction=correction)
        curves.append(_scan(criterion, bandwidths.values, threads))
    logger.debug("Averaged %d background-superposed Campbell curves", replicates)
    return _selection(BandwidthMethod.CAMPBELL, bandwidths, np.mean(curves, axis=0))


def select_intensity_candidate(
    pattern: PointPattern,
    candidates: Sequence[IntensityFunction],
) -> tuple[int, np.ndarray]:
    """Pick the candidate intensity whose reciprocal sum best matches the window volume.

    Args:
        pattern (PointPattern): Observed pattern.
        candidates (Sequence[IntensityFunction]): Intensity functions to compare.

    Returns:
        tuple[int, np.ndarray]: Index of the best candidate and all criterion values.
    """
    if not candidates:
        raise ValueError("At least one candidate intensity is required")
    area = pattern.window.volume

    def discrepancy(candidate: IntensityFunction) -> float:
        if pattern.count == 0:
            return 0.0
        values = np.asarray(candidate(pattern.points), dtype=float)
        if np.any(values <= 0.0):
            return math.inf
        return float((np.sum(1.0 / values) - area) ** 2)

    scores = np.asarray([discrepancy(candidate) for candidate in candidates])
    return grid_optimum(scores, ArgKind.MIN), scores


def select_bandwidth(
    method: BandwidthMethod,
    pattern: PointPattern,
    kernel: KernelSpec,
    correction: EdgeCorrection,
    bandwidths: BandwidthGrid,
    grid: Grid | None = None,
    threads: int | None = None,
) -> BandwidthSelection:
    """Dispatch to the selector for a method.

    Diggle's criterion ignores the kernel and edge correction.
    """
    if method is BandwidthMethod.CAMPBELL:
        return select_campbell(pattern, kernel, correction, bandwidths, threads)
    if method is BandwidthMethod.PPL:
        return select_ppl(pattern, kernel, bandwidths, correction, grid, threads)
    return select_diggle(pattern, bandwidths, threads=threads)


def _scan(criterion: Callable[[float], float], values: Sequence[float], threads: int | None) -> np.ndarray:
    """Evaluate a criterion at every given bandwidth, in order."""
    parallel = Parallel(n_jobs=resolve_threads(threads), prefer="threads")
    return np.asarray(parallel(delayed(criterion)(h) for h in values), dtype=float).reshape(-1)


def _selection(method: BandwidthMethod, bandwidths: BandwidthGrid, curve: np.ndarray) -> BandwidthSelection:
    argkind = ARGKIND_BY_METHOD[method]
    index = grid_optimum(curve, argkind)
    selected = bandwidths.values[index]
    logger.debug("%s selected h=%.4g (index %d of %d)", method.value, selected, index, curve.size)
    return BandwidthSelection(
        method=method,
        selected_h=selected,
        curve=tuple((h, float(value)) for h, value in zip(bandwidths.values, curve)),
        argkind=argkind,
    )


def _background_bound(background: float | IntensityFunction, window: Window, background_max: float | None) -> float:
    """Validate a background intensity and return its dominating constant."""
    if not callable(background):
        if not background > 0.0 or not math.isfinite(background):
            raise ValueError(f"Background intensity must be positive, got {background}")
        return float(background)
    nodes = make_grid(window, (get_eval_resolution(),) * window.dimension).nodes
    values = np.asarray(background(nodes), dtype=float)
    if values.shape != (nodes.shape[0],) or not np.all(np.isfinite(values)) or np.any(values <= 0.0):
        raise ValueError("Background intensity function must be finite and strictly positive on the window")
    if background_max is None:
        return float(values.max()) * get_lgcp_safety()
    if background_max < float(values.max()):
        raise ValueError(f"Background bound {background_max} is below the grid maximum {values.max():g}")
    return background_max
