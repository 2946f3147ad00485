from __future__ import annotations

"""Second-order summaries: the K-function estimate and lens-area integrals."""

import math
from typing import Callable

import numpy as np

from src.config import get_k_range_rule
from src.domain.errors import InsufficientPointsError
from src.domain.schemas import KCorrection, KEstimate, PointPattern, Window
from src.logic.geometry import pairwise_distances, translation_overlap

import logging

logger = logging.getLogger(__name__)

LENS_TOLERANCE = 1e-12


def estimate_k(pattern: PointPattern, correction: KCorrection = KCorrection.TRANSLATION) -> KEstimate:
    """Estimate Ripley's K-function as a set of weighted distance atoms.

    Args:
        pattern (PointPattern): Pattern with at least two points.
        correction (KCorrection): Translation correction or none.

    Returns:
        KEstimate: Sorted pair distances, weights per unordered pair and n / |W|.
    """
    if pattern.count < 2:
        raise InsufficientPointsError(f"K-function estimation needs at least two points, got {pattern.count}")
    first, second, distances = pairwise_distances(pattern)
    area = pattern.window.volume
    if correction is KCorrection.TRANSLATION:
        overlap = translation_overlap(pattern.window, pattern.points[first] - pattern.points[second])
        # Both ordered pairs carry |W| / overlap divided by |W|.
        weights = 2.0 / overlap
    else:
        weights = np.full(distances.shape, 2.0 / area)
    order = np.argsort(distances, kind="stable")
    logger.debug("Estimated K from %d pairs (%s correction)", distances.size, correction.value)
    return KEstimate(
        distances=distances[order],
        weights=weights[order],
        intensity_estimate=pattern.count / area,
        correction=correction,
    )


def k_function(estimate: KEstimate, t: np.ndarray | float) -> np.ndarray:
    """Evaluate the step function K-hat at one or more distances."""
    cumulative = np.concatenate([[0.0], np.cumsum(estimate.weights)])
    index = np.searchsorted(estimate.distances, np.asarray(t, dtype=float), side="right")
    return cumulative[index] / estimate.intensity_estimate**2


def l_function(estimate: KEstimate, t: np.ndarray | float) -> np.ndarray:
    """Return sqrt(K-hat(t) / pi), the planar variance-stabilised form."""
    return np.sqrt(k_function(estimate, t) / math.pi)


def k_range(window: Window, intensity: float, fraction: float | None = None, pairs: float | None = None) -> float:
    """Return the largest distance at which the K-function estimate is used.

    The range is the smaller of a fraction of the shortest window side and the
    radius of a ball expected to hold the given number of pairs.

    Args:
        window (Window): Observation window.
        intensity (float): Intensity estimate; non-positive values skip the pair bound.
        fraction (float | None): Fraction of the shortest side, config value when None.
        pairs (float | None): Expected pair count, config value when None.

    Returns:
        float: Positive distance.
    """
    default_fraction, default_pairs = get_k_range_rule()
    fraction = default_fraction if fraction is None else fraction
    pairs = default_pairs if pairs is None else pairs
    if fraction <= 0.0 or pairs <= 0.0:
        raise ValueError(f"K range rule needs positive values, got fraction={fraction}, pairs={pairs}")
    shortest = float(np.min(np.subtract(window.upper, window.lower)))
    side_bound = fraction * shortest
    if intensity <= 0.0:
        return side_bound
    dimension = window.dimension
    ball = math.pi ** (dimension / 2.0) / math.gamma(dimension / 2.0 + 1.0)
    return min(side_bound, (pairs / (intensity * ball)) ** (1.0 / dimension))


def lens_area(t: np.ndarray | float, h: float) -> np.ndarray:
    """Area of the intersection of two discs of radius h whose centres are t apart.

    Args:
        t (np.ndarray | float): Centre distances in [0, 2h].
        h (float): Disc radius.

    Returns:
        np.ndarray: Lens areas.
    """
    if h <= 0.0:
        raise ValueError(f"Disc radius must be positive, got {h}")
    distance = np.asarray(t, dtype=float)
    if np.any(distance < -LENS_TOLERANCE) or np.any(distance > 2.0 * h * (1.0 + LENS_TOLERANCE)):
        raise ValueError(f"Lens distances must lie in [0, {2.0 * h}]")
    distance = np.clip(distance, 0.0, 2.0 * h)
    ratio = np.clip(distance / (2.0 * h), 0.0, 1.0)
    return 2.0 * h * h * np.arccos(ratio) - 0.5 * distance * np.sqrt(np.clip(4.0 * h * h - distance**2, 0.0, None))


def stieltjes_integral(estimate: KEstimate, f: Callable[[np.ndarray], np.ndarray], t_max: float) -> float:
    """Integrate f against dK-hat over [0, t_max].

    Args:
        estimate (KEstimate): Atoms of the K-function estimate.
        f (Callable[[np.ndarray], np.ndarray]): Vectorised integrand in t.
        t_max (float): Upper limit, inclusive.

    Returns:
        float: Sum of f(d) weight / lambda-hat^2 over atoms with d <= t_max.
    """
    inside = estimate.distances <= t_max
    if not np.any(inside):
        return 0.0
    values = np.asarray(f(estimate.distances[inside]), dtype=float)
    return float(np.dot(values, estimate.weights[inside]) / estimate.intensity_estimate**2)
