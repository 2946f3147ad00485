from __future__ import annotations

"""Windows, patterns, distances and midpoint quadrature grids."""

import math
from typing import Sequence

import numpy as np
from scipy.spatial.distance import pdist  # type: ignore[import-untyped]

from src.domain.schemas import Grid, PointPattern, Window

import logging

logger = logging.getLogger(__name__)


def volume(window: Window) -> float:
    """Return the Lebesgue measure of a window."""
    return window.volume


def dilate(window: Window, margin: float) -> Window:
    """Extend every side of a window by a margin on both ends.

    Args:
        window (Window): Window to enlarge.
        margin (float): Non-negative extension per side.

    Returns:
        Window: The dilated window.
    """
    if margin < 0.0 or not math.isfinite(margin):
        raise ValueError(f"Dilation margin must be finite and non-negative, got {margin}")
    return Window(
        lower=tuple(low - margin for low in window.lower),
        upper=tuple(high + margin for high in window.upper),
    )


def contains(window: Window, points: np.ndarray) -> np.ndarray:
    """Return a boolean mask of points strictly inside the window."""
    return window.contains(points)


def pairwise_distances(pattern: PointPattern) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """List every unordered pair of points once with its Euclidean distance.

    Args:
        pattern (PointPattern): Pattern to enumerate.

    Returns:
        tuple[np.ndarray, np.ndarray, np.ndarray]: Indices i, indices j (i < j)
        and distances, each of length n(n-1)/2.
    """
    count = pattern.count
    first, second = np.triu_indices(count, k=1)
    if count < 2:
        return first, second, np.empty(0)
    # pdist walks pairs in the same row-major order as triu_indices.
    return first, second, pdist(pattern.points)


def make_grid(window: Window, resolution: Sequence[int]) -> Grid:
    """Build a midpoint quadrature grid over a window.

    Args:
        window (Window): Window to cover.
        resolution (Sequence[int]): Cells per axis.

    Returns:
        Grid: Cell-centre nodes in C order (last axis fastest) and the common
        cell volume.
    """
    counts = tuple(int(count) for count in resolution)
    if len(counts) != window.dimension:
        raise ValueError(f"Resolution {counts} does not match window dimension {window.dimension}")
    if any(count < 1 for count in counts):
        raise ValueError(f"Grid resolution must be positive, got {counts}")
    steps = [side / count for side, count in zip(window.sides, counts)]
    axes = [low + (np.arange(count) + 0.5) * step for low, count, step in zip(window.lower, counts, steps)]
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([axis.ravel() for axis in mesh], axis=1)
    nodes.setflags(write=False)
    logger.debug("Built grid with resolution %s over %s", counts, window)
    return Grid(
        window=window,
        resolution=counts,
        nodes=nodes,
        cell_volume=window.volume / math.prod(counts),
    )


def translation_overlap(window: Window, offsets: np.ndarray) -> np.ndarray:
    """Return the volume of W intersected with W shifted by each offset."""
    shifts = np.abs(np.asarray(offsets, dtype=float).reshape(-1, window.dimension))
    overlap = np.clip(np.asarray(window.sides) - shifts, 0.0, None)
    return np.prod(overlap, axis=1)


def superpose(first: PointPattern, second: PointPattern) -> PointPattern:
    """Return the multiset union of two patterns observed in the same window."""
    if first.window != second.window:
        raise ValueError("Superposed patterns must share a window")
    return PointPattern(window=first.window, points=np.vstack([first.points, second.points]))


def disc_rectangle_area(centers: np.ndarray, radius: float, window: Window) -> np.ndarray:
    """Return the area of B(c, radius) intersected with a planar window.

    Args:
        centers (np.ndarray): (m, 2) disc centres.
        radius (float): Disc radius.
        window (Window): Rectangle to intersect with.

    Returns:
        np.ndarray: Intersection areas, one per centre.
    """
    if window.dimension != 2:
        raise ValueError("Disc-rectangle areas are only defined in the plane")
    if radius <= 0.0:
        raise ValueError(f"Radius must be positive, got {radius}")
    coords = np.asarray(centers, dtype=float).reshape(-1, 2)
    x0 = (window.lower[0] - coords[:, 0]) / radius
    x1 = (window.upper[0] - coords[:, 0]) / radius
    y0 = (window.lower[1] - coords[:, 1]) / radius
    y1 = (window.upper[1] - coords[:, 1]) / radius
    # Inclusion-exclusion over the four quadrant regions {x >= a, y >= b}.
    unit = _quadrant(x0, y0) - _quadrant(x1, y0) - _quadrant(x0, y1) + _quadrant(x1, y1)
    return np.clip(unit, 0.0, math.pi) * radius**2


def _segment(c: np.ndarray) -> np.ndarray:
    """Area of the unit disc on the side x >= c."""
    c = np.clip(c, -1.0, 1.0)
    return np.arccos(c) - c * np.sqrt(1.0 - c * c)


def _antiderivative(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, -1.0, 1.0)
    return 0.5 * (x * np.sqrt(1.0 - x * x) + np.arcsin(x))


def _corner(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Area of the unit disc in {x >= a, y >= b} for a, b >= 0."""
    top = np.sqrt(np.clip(1.0 - b * b, 0.0, None))
    start = np.minimum(a, top)
    area = _antiderivative(top) - _antiderivative(start) - b * (top - start)
    return np.where(a * a + b * b < 1.0, area, 0.0)


def _quadrant(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Area of the unit disc in {x >= a, y >= b} for any signs."""
    return np.select(
        [(a >= 0.0) & (b >= 0.0), (a < 0.0) & (b >= 0.0), (a >= 0.0) & (b < 0.0)],
        [
            _corner(a, b),
            _segment(b) - _corner(-a, b),
            _segment(a) - _corner(a, -b),
        ],
        default=math.pi - _segment(-a) - _segment(-b) + _corner(-a, -b),
    )
