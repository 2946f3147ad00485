from __future__ import annotations

"""Kernel intensity estimation with optional edge correction, plus moment oracles."""

from functools import partial
from typing import Callable

from joblib import Parallel, delayed  # type: ignore[import-untyped]
import numpy as np
from scipy.spatial.distance import cdist  # type: ignore[import-untyped]

from src.config import get_raster_chunk_size, resolve_threads
from src.domain.schemas import (
    EdgeCorrection,
    Grid,
    IntensityRaster,
    KernelSpec,
    PointPattern,
    ProductDensity,
    Window,
)
from src.logic.kernels import radial_profile, support_radius, window_mass

import logging

logger = logging.getLogger(__name__)

EDGE_FLOOR = 1e-12

IntensityFunction = Callable[[np.ndarray], np.ndarray]


def edge_weights(
    kernel: KernelSpec,
    correction: EdgeCorrection,
    centers: np.ndarray,
    h: float,
    window: Window,
) -> np.ndarray:
    """Return w_h at the given centres, floored away from zero.

    Args:
        kernel (KernelSpec): Kernel used by the estimator.
        correction (EdgeCorrection): Edge-correction mode.
        centers (np.ndarray): Query points (global) or data points (local).
        h (float): Bandwidth.
        window (Window): Observation window.

    Returns:
        np.ndarray: One weight per centre; ones when no correction applies.
    """
    coords = np.asarray(centers, dtype=float).reshape(-1, window.dimension)
    if correction is EdgeCorrection.NONE:
        return np.ones(coords.shape[0])
    return np.maximum(window_mass(kernel, coords, h, window), EDGE_FLOOR)


def estimate_many(
    queries: np.ndarray,
    h: float,
    pattern: PointPattern,
    kernel: KernelSpec,
    correction: EdgeCorrection,
) -> np.ndarray:
    """Evaluate the kernel intensity estimate at several query points.

    Args:
        queries (np.ndarray): (m, d) query locations.
        h (float): Bandwidth.
        pattern (PointPattern): Observed pattern.
        kernel (KernelSpec): Smoothing kernel.
        correction (EdgeCorrection): Edge-correction mode.

    Returns:
        np.ndarray: Non-negative estimates, one per query.
    """
    _check_bandwidth(h)
    coords = np.asarray(queries, dtype=float).reshape(-1, pattern.window.dimension)
    data_weights = _data_weights(h, pattern, kernel, correction)
    return _estimate_block(coords, h=h, pattern=pattern, kernel=kernel, correction=correction, data_weights=data_weights)


def estimate_at(
    x: np.ndarray,
    h: float,
    pattern: PointPattern,
    kernel: KernelSpec,
    correction: EdgeCorrection,
) -> float:
    """Evaluate the kernel intensity estimate at one location of the window."""
    point = np.asarray(x, dtype=float).reshape(1, -1)
    _check_in_window(point, pattern.window)
    return float(estimate_many(point, h, pattern, kernel, correction)[0])


def estimate_leave_one_out(
    x: np.ndarray,
    h: float,
    pattern: PointPattern,
    kernel: KernelSpec,
    correction: EdgeCorrection,
) -> float:
    """Evaluate the estimate at a data point with one occurrence of it removed.

    Args:
        x (np.ndarray): A point of the pattern.
        h (float): Bandwidth.
        pattern (PointPattern): Observed pattern.
        kernel (KernelSpec): Smoothing kernel.
        correction (EdgeCorrection): Edge-correction mode.

    Returns:
        float: Estimate from the reduced pattern.
    """
    point = np.asarray(x, dtype=float).ravel()
    matches = np.flatnonzero(np.all(pattern.points == point, axis=1))
    if matches.size == 0:
        raise ValueError(f"Point {point.tolist()} is not a member of the pattern")
    reduced = PointPattern(window=pattern.window, points=np.delete(pattern.points, matches[0], axis=0))
    return estimate_at(point, h, reduced, kernel, correction)


def leave_one_out_at_points(
    h: float,
    pattern: PointPattern,
    kernel: KernelSpec,
    correction: EdgeCorrection,
) -> np.ndarray:
    """Return the leave-one-out estimate at every data point.

    Each point drops only its own term, so duplicates still see each other.
    """
    _check_bandwidth(h)
    points = pattern.points
    if pattern.count == 0:
        return np.empty(0)
    contributions = radial_profile(kernel, cdist(points, points, "sqeuclidean") / (h * h))
    np.fill_diagonal(contributions, 0.0)
    if correction is EdgeCorrection.LOCAL:
        contributions = contributions / edge_weights(kernel, correction, points, h, pattern.window)[None, :]
    totals = contributions.sum(axis=1) / h**pattern.window.dimension
    if correction is EdgeCorrection.GLOBAL:
        totals = totals / edge_weights(kernel, correction, points, h, pattern.window)
    return totals


def rasterize(
    pattern: PointPattern,
    h: float,
    kernel: KernelSpec,
    correction: EdgeCorrection,
    grid: Grid,
    threads: int | None = None,
) -> IntensityRaster:
    """Evaluate the estimate at every node of a grid.

    Args:
        pattern (PointPattern): Observed pattern.
        h (float): Bandwidth.
        kernel (KernelSpec): Smoothing kernel.
        correction (EdgeCorrection): Edge-correction mode.
        grid (Grid): Grid over the pattern's window.
        threads (int | None): Worker count; 0 or None uses all CPUs.

    Returns:
        IntensityRaster: Estimates at the grid nodes.
    """
    _check_bandwidth(h)
    if grid.window != pattern.window:
        raise ValueError("Raster grid must cover the pattern window")
    if pattern.count == 0:
        values = np.zeros(grid.size)
    else:
        data_weights = _data_weights(h, pattern, kernel, correction)
        chunk = get_raster_chunk_size()
        blocks = [grid.nodes[start : start + chunk] for start in range(0, grid.size, chunk)]
        block_fn = partial(
            _estimate_block,
            h=h,
            pattern=pattern,
            kernel=kernel,
            correction=correction,
            data_weights=data_weights,
        )
        # Blocks are fixed by the chunk size and come back in order.
        parallel = Parallel(n_jobs=resolve_threads(threads), prefer="threads")
        values = np.concatenate(parallel(delayed(block_fn)(block) for block in blocks))
    logger.debug(
        "Rasterized %d points at h=%.4g (%s, %s) on %s nodes",
        pattern.count,
        h,
        kernel.label,
        correction.value,
        grid.size,
    )
    return IntensityRaster(grid=grid, values=values, bandwidth=h, kernel=kernel, correction=correction)


def integrated_mass(raster: IntensityRaster) -> float:
    """Return the midpoint-rule integral of a raster over its window."""
    return float(raster.values.sum() * raster.grid.cell_volume)


def subtract_background(raster: IntensityRaster, background: float | IntensityFunction) -> IntensityRaster:
    """Remove a known background intensity from a raster, flooring at zero.

    Args:
        raster (IntensityRaster): Estimate of the superposed intensity.
        background (float | IntensityFunction): Constant or function of the nodes.

    Returns:
        IntensityRaster: Estimate of the original intensity.
    """
    nodes = raster.grid.nodes
    level = background(nodes) if callable(background) else np.full(nodes.shape[0], float(background))
    difference = raster.values - np.asarray(level, dtype=float)
    clipped = int(np.count_nonzero(difference < 0.0))
    if clipped:
        logger.warning("Background subtraction clipped %d of %d nodes at zero", clipped, difference.size)
    return IntensityRaster(
        grid=raster.grid,
        values=np.clip(difference, 0.0, None),
        bandwidth=raster.bandwidth,
        kernel=raster.kernel,
        correction=raster.correction,
    )


def poisson_product_density(intensity: IntensityFunction) -> ProductDensity:
    """Return the product density of a Poisson process with the given intensity."""
    return ProductDensity(intensity=intensity)


def cox_product_density(
    intensity: IntensityFunction,
    pair_correlation: Callable[[np.ndarray], np.ndarray],
) -> ProductDensity:
    """Return rho2(x, y) = lambda(x) lambda(y) g(|x - y|) for a stationary pair correlation g.

    Args:
        intensity (IntensityFunction): First-order intensity.
        pair_correlation (Callable[[np.ndarray], np.ndarray]): g as a function of distance.

    Returns:
        ProductDensity: Second-order description of the process.
    """

    def rho2(first: np.ndarray, second: np.ndarray) -> np.ndarray:
        product = np.outer(intensity(first), intensity(second))
        return product * pair_correlation(cdist(first, second))

    return ProductDensity(intensity=intensity, rho2=rho2)


def theoretical_mean(
    x: np.ndarray,
    h: float,
    kernel: KernelSpec,
    correction: EdgeCorrection,
    density: ProductDensity,
    grid: Grid,
) -> float:
    """Return the expectation of the estimate at x by midpoint quadrature.

    Args:
        x (np.ndarray): Query location.
        h (float): Bandwidth.
        kernel (KernelSpec): Smoothing kernel.
        correction (EdgeCorrection): Edge-correction mode.
        density (ProductDensity): True first and second order structure.
        grid (Grid): Quadrature grid over the window.

    Returns:
        float: Expected estimate.
    """
    weights, nodes = _moment_weights(np.asarray(x, dtype=float), h, kernel, correction, grid)
    if nodes.shape[0] == 0:
        return 0.0
    return float(np.dot(weights, density.intensity(nodes)))


def theoretical_second_moment(
    x: np.ndarray,
    h: float,
    kernel: KernelSpec,
    correction: EdgeCorrection,
    density: ProductDensity,
    grid: Grid,
) -> float:
    """Return the second moment of the estimate at x by midpoint quadrature.

    Args:
        x (np.ndarray): Query location.
        h (float): Bandwidth.
        kernel (KernelSpec): Smoothing kernel.
        correction (EdgeCorrection): Edge-correction mode.
        density (ProductDensity): True first and second order structure.
        grid (Grid): Quadrature grid over the window.

    Returns:
        float: The diagonal term plus the pair term.
    """
    weights, nodes = _moment_weights(np.asarray(x, dtype=float), h, kernel, correction, grid)
    if nodes.shape[0] == 0:
        return 0.0
    intensity = density.intensity(nodes)
    # The squared kernel weight carries one cell volume only.
    diagonal = float(np.dot(weights * weights, intensity) / grid.cell_volume)
    if density.factorizes:
        pair = float(np.dot(weights, intensity)) ** 2
    else:
        pair = _quadratic_form(weights, nodes, density)
    return diagonal + pair


def theoretical_mise(
    h: float,
    kernel: KernelSpec,
    correction: EdgeCorrection,
    density: ProductDensity,
    grid: Grid,
    threads: int | None = None,
) -> float:
    """Return the mean integrated squared error of the estimate over the grid's window.

    Args:
        h (float): Bandwidth.
        kernel (KernelSpec): Smoothing kernel.
        correction (EdgeCorrection): Edge-correction mode.
        density (ProductDensity): True first and second order structure.
        grid (Grid): Grid used for both the outer and inner integrals.
        threads (int | None): Worker count; 0 or None uses all CPUs.

    Returns:
        float: Integrated variance plus integrated squared bias.
    """
    _check_bandwidth(h)
    truth = density.intensity(grid.nodes)

    def local_error(index: int) -> float:
        node = grid.nodes[index]
        mean = theoretical_mean(node, h, kernel, correction, density, grid)
        second = theoretical_second_moment(node, h, kernel, correction, density, grid)
        return second - 2.0 * mean * truth[index] + truth[index] ** 2

    parallel = Parallel(n_jobs=resolve_threads(threads), prefer="threads")
    errors = np.asarray(parallel(delayed(local_error)(index) for index in range(grid.size)), dtype=float)
    return float(max(errors.sum() * grid.cell_volume, 0.0))


def _check_bandwidth(h: float) -> None:
    if not h > 0.0 or not np.isfinite(h):
        raise ValueError(f"Bandwidth must be positive and finite, got {h}")


def _check_in_window(points: np.ndarray, window: Window) -> None:
    """Reject query points outside the closed window."""
    lower = np.asarray(window.lower)
    upper = np.asarray(window.upper)
    if points.shape[1] != window.dimension or not np.all((points >= lower) & (points <= upper)):
        raise ValueError(f"Query point {points.tolist()} lies outside the window")


def _data_weights(
    h: float,
    pattern: PointPattern,
    kernel: KernelSpec,
    correction: EdgeCorrection,
) -> np.ndarray:
    """Per-point divisors for local correction, ones otherwise."""
    if correction is EdgeCorrection.LOCAL:
        return edge_weights(kernel, correction, pattern.points, h, pattern.window)
    return np.ones(pattern.count)


def _estimate_block(
    queries: np.ndarray,
    *,
    h: float,
    pattern: PointPattern,
    kernel: KernelSpec,
    correction: EdgeCorrection,
    data_weights: np.ndarray,
) -> np.ndarray:
    """Estimate at a block of queries given precomputed data-point weights."""
    if pattern.count == 0:
        return np.zeros(queries.shape[0])
    contributions = radial_profile(kernel, cdist(queries, pattern.points, "sqeuclidean") / (h * h))
    totals = (contributions / data_weights[None, :]).sum(axis=1) / h**pattern.window.dimension
    if correction is EdgeCorrection.GLOBAL:
        totals = totals / edge_weights(kernel, correction, queries, h, pattern.window)
    return totals


def _moment_weights(
    x: np.ndarray,
    h: float,
    kernel: KernelSpec,
    correction: EdgeCorrection,
    grid: Grid,
) -> tuple[np.ndarray, np.ndarray]:
    """Return h^-d kappa((x - y) / h) / w(x, y) times the cell volume on nodes y in the kernel support."""
    _check_bandwidth(h)
    point = x.reshape(1, -1)
    squared = cdist(point, grid.nodes, "sqeuclidean")[0] / (h * h)
    support = squared <= support_radius(kernel) ** 2
    nodes = grid.nodes[support]
    weights = radial_profile(kernel, squared[support]) * grid.cell_volume / h**grid.window.dimension
    if correction is EdgeCorrection.GLOBAL:
        weights = weights / edge_weights(kernel, correction, point, h, grid.window)[0]
    elif correction is EdgeCorrection.LOCAL:
        weights = weights / edge_weights(kernel, correction, nodes, h, grid.window)
    return weights, nodes


def _quadratic_form(weights: np.ndarray, nodes: np.ndarray, density: ProductDensity) -> float:
    """Return sum_ij a_i a_j rho2(y_i, y_j), accumulated in row blocks."""
    chunk = get_raster_chunk_size()
    total = 0.0
    for start in range(0, nodes.shape[0], chunk):
        block = density.second_order(nodes[start : start + chunk], nodes)
        total += float(weights[start : start + chunk] @ (block @ weights))
    return total

