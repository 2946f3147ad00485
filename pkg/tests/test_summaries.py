from __future__ import annotations

"""Tests for the K-function estimate and lens-area integrals."""

import math
from functools import partial
from typing import Callable

import numpy as np
import pytest
from pydantic import ValidationError

from src.domain.errors import InsufficientPointsError
from src.domain.schemas import KCorrection, KEstimate, PointPattern, RngStream, Window
from src.logic.simulate import simulate_poisson
from src.logic.summaries import estimate_k, k_function, k_range, l_function, lens_area, stieltjes_integral


def test_two_point_k_without_correction(make_pattern: Callable[..., PointPattern]) -> None:
    estimate = estimate_k(make_pattern((0.3, 0.5), (0.5, 0.5)), KCorrection.NONE)
    assert estimate.intensity_estimate == 2.0
    assert k_function(estimate, np.array([0.1, 0.19, 0.21, 0.5])) == pytest.approx([0.0, 0.0, 0.5, 0.5])


def test_translation_correction_weights(make_pattern: Callable[..., PointPattern]) -> None:
    estimate = estimate_k(make_pattern((0.3, 0.5), (0.5, 0.5)))
    assert estimate.correction is KCorrection.TRANSLATION
    # The overlap of W and W + (0.2, 0) is 0.8.
    assert estimate.weights.tolist() == pytest.approx([2.0 / 0.8])
    assert float(k_function(estimate, 0.3)) == pytest.approx(2.0 / 0.8 / 4.0)


def test_k_is_zero_below_smallest_distance(poisson_pattern: PointPattern) -> None:
    estimate = estimate_k(poisson_pattern)
    assert float(k_function(estimate, estimate.distances[0] / 2.0)) == 0.0


def test_k_is_non_decreasing(poisson_pattern: PointPattern) -> None:
    estimate = estimate_k(poisson_pattern)
    values = k_function(estimate, np.linspace(0.0, 1.5, 200))
    assert np.all(np.diff(values) >= 0.0)


def test_k_needs_two_points(make_pattern: Callable[..., PointPattern]) -> None:
    with pytest.raises(InsufficientPointsError):
        estimate_k(make_pattern((0.5, 0.5)))
    with pytest.raises(InsufficientPointsError):
        estimate_k(make_pattern())


def test_k_atoms_must_be_sorted() -> None:
    with pytest.raises(ValidationError):
        KEstimate(distances=[0.2, 0.1], weights=[1.0, 1.0], intensity_estimate=1.0)


def test_l_function_of_poisson_is_near_identity(unit_square: Window) -> None:
    pattern = simulate_poisson(400.0, unit_square, 400.0, RngStream(seed=5).generator())
    estimate = estimate_k(pattern)
    assert float(l_function(estimate, 0.1)) == pytest.approx(0.1, rel=0.1)


def test_k_of_poisson_averages_to_pi_t_squared(unit_square: Window) -> None:
    stream = RngStream(seed=99)
    values = [
        float(k_function(estimate_k(simulate_poisson(250.0, unit_square, 250.0, stream.generator(index))), 0.1))
        for index in range(100)
    ]
    standard_error = float(np.std(values, ddof=1)) / math.sqrt(len(values))
    assert abs(float(np.mean(values)) - math.pi * 0.01) < 3.0 * standard_error + 1e-3


@pytest.mark.parametrize(
    ("t", "expected"),
    [
        (0.0, math.pi * 0.04),
        (0.4, 0.0),
        (0.2, (2.0 * math.pi / 3.0 - math.sqrt(3.0) / 2.0) * 0.04),
    ],
)
def test_lens_area_reference_values(t: float, expected: float) -> None:
    assert float(lens_area(t, 0.2)) == pytest.approx(expected, abs=1e-12)


def test_lens_area_domain() -> None:
    with pytest.raises(ValueError):
        lens_area(0.5, 0.2)
    with pytest.raises(ValueError):
        lens_area(0.1, 0.0)


def test_stieltjes_integral_of_constants(make_pattern: Callable[..., PointPattern]) -> None:
    estimate = estimate_k(make_pattern((0.3, 0.5), (0.5, 0.5)), KCorrection.NONE)
    assert stieltjes_integral(estimate, np.ones_like, 1.0) == pytest.approx(float(k_function(estimate, 1.0)))
    assert stieltjes_integral(estimate, np.zeros_like, 1.0) == 0.0
    assert stieltjes_integral(estimate, np.ones_like, 0.1) == 0.0


def test_stieltjes_integral_of_lens_area(make_pattern: Callable[..., PointPattern]) -> None:
    estimate = estimate_k(make_pattern((0.3, 0.5), (0.5, 0.5)), KCorrection.NONE)
    value = stieltjes_integral(estimate, partial(lens_area, h=0.15), 0.3)
    assert value == pytest.approx(float(lens_area(0.2, 0.15)) * 0.5)


def test_k_range_takes_the_tighter_bound(unit_square: Window) -> None:
    assert k_range(unit_square, 50.0) == pytest.approx(0.25)
    assert k_range(unit_square, 10000.0) == pytest.approx(math.sqrt(1000.0 / (math.pi * 10000.0)))
    assert k_range(Window(lower=(0.0, 0.0), upper=(2.0, 1.0)), 0.0) == pytest.approx(0.25)
    assert k_range(Window(lower=(0.0,), upper=(4.0,)), 1000.0, fraction=0.5, pairs=10.0) == pytest.approx(0.005)
    with pytest.raises(ValueError):
        k_range(unit_square, 50.0, fraction=0.0)


def test_lens_integral_matches_a_direct_double_integral(unit_square: Window) -> None:
    rng = RngStream(seed=606).generator()
    points = 0.3 + 0.4 * rng.uniform(size=(8, 2))
    estimate = estimate_k(PointPattern(window=unit_square, points=points))
    h = 0.15
    value = stieltjes_integral(estimate, partial(lens_area, h=h), 2.0 * h)
    # Sum over ordered pairs of |W|/|W cap W+(x_i-x_j)| times the area where both discs cover u.
    offsets = np.abs(points[:, None, :] - points[None, :, :])
    pair_weights = 1.0 / np.prod(1.0 - offsets, axis=2)
    np.fill_diagonal(pair_weights, 0.0)
    low, high = points.min(axis=0) - h, points.max(axis=0) + h
    samples = 400_000
    locations = low + (high - low) * rng.uniform(size=(samples, 2))
    covered = (np.linalg.norm(locations[:, None, :] - points[None, :, :], axis=2) < h).astype(float)
    pair_cover = np.einsum("ui,ij,uj->u", covered, pair_weights, covered)
    direct = float(np.prod(high - low)) * float(pair_cover.mean()) / estimate.intensity_estimate**2
    assert value == pytest.approx(direct, rel=0.01)
