from __future__ import annotations

"""Tests for kernel evaluation and window masses."""

import math

import numpy as np
import pytest
from scipy.integrate import quad  # type: ignore[import-untyped]

from src.domain.schemas import KernelFamily, KernelSpec, Window
from src.logic.kernels import (
    at_origin,
    evaluate,
    integrate_over_window,
    parse_kernel,
    radial_profile,
    support_grid,
    window_mass,
)


def test_parse_kernel_aliases() -> None:
    assert parse_kernel("box") == KernelSpec(family=KernelFamily.BETA, gamma=0.0)
    assert parse_kernel("Epanechnikov").gamma == 1.0
    assert parse_kernel("beta:2.5", dimension=3) == KernelSpec(family=KernelFamily.BETA, gamma=2.5, dimension=3)
    assert parse_kernel("gaussian").family is KernelFamily.GAUSSIAN
    with pytest.raises(ValueError):
        parse_kernel("triweight")
    with pytest.raises(ValueError):
        parse_kernel("beta:abc")


def test_kernel_labels() -> None:
    assert parse_kernel("uniform").label == "box"
    assert parse_kernel("beta:1").label == "epanechnikov"
    assert parse_kernel("beta:3").label == "beta:3"


def test_values_at_origin() -> None:
    assert at_origin(KernelSpec(family=KernelFamily.BETA, gamma=0.0)) == pytest.approx(1.0 / math.pi)
    assert at_origin(KernelSpec(family=KernelFamily.BETA, gamma=1.0)) == pytest.approx(2.0 / math.pi)
    assert at_origin(KernelSpec(family=KernelFamily.GAUSSIAN)) == pytest.approx(1.0 / (2.0 * math.pi))
    assert at_origin(KernelSpec(family=KernelFamily.GAUSSIAN, dimension=1)) == pytest.approx(
        1.0 / math.sqrt(2.0 * math.pi)
    )


def test_evaluate_single_point_and_support(box: KernelSpec, epanechnikov: KernelSpec) -> None:
    assert evaluate(box, np.zeros(2)) == pytest.approx(1.0 / math.pi)
    assert evaluate(epanechnikov, np.array([1.0, 0.5])) == 0.0
    values = evaluate(epanechnikov, np.array([[0.0, 0.0], [0.6, 0.0], [2.0, 0.0]]))
    assert isinstance(values, np.ndarray)
    assert values == pytest.approx([2.0 / math.pi, 2.0 / math.pi * 0.64, 0.0])
    with pytest.raises(ValueError):
        evaluate(box, np.zeros(3))


@pytest.mark.parametrize("gamma", [0.0, 1.0, 2.0, 3.5])
def test_beta_kernels_integrate_to_one_on_the_line(gamma: float) -> None:
    kernel = KernelSpec(family=KernelFamily.BETA, gamma=gamma, dimension=1)
    total, _ = quad(lambda x: float(radial_profile(kernel, np.asarray(x * x))), -1.0, 1.0)
    assert total == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("gamma", [0.0, 1.0, 2.0])
def test_beta_kernels_integrate_to_one_in_the_plane(gamma: float) -> None:
    kernel = KernelSpec(family=KernelFamily.BETA, gamma=gamma)
    # Radial integral 2 pi r kappa(r) over [0, 1].
    total, _ = quad(lambda r: 2.0 * math.pi * r * float(radial_profile(kernel, np.asarray(r * r))), 0.0, 1.0)
    assert total == pytest.approx(1.0, rel=1e-6)


def test_support_grid_extents(gaussian: KernelSpec, box: KernelSpec) -> None:
    assert support_grid(box, 16).window.upper == (1.0, 1.0)
    assert support_grid(gaussian, 16).window.lower == (-8.0, -8.0)
    cube = support_grid(KernelSpec(family=KernelFamily.BETA, gamma=1.0, dimension=3), 256)
    assert cube.resolution == (32, 32, 32)


def test_full_ball_inside_window_has_unit_mass(unit_square: Window, box: KernelSpec, epanechnikov: KernelSpec) -> None:
    assert integrate_over_window(box, np.array([0.5, 0.5]), 0.1, unit_square) == pytest.approx(1.0, abs=1e-3)
    assert integrate_over_window(epanechnikov, np.array([0.5, 0.5]), 0.1, unit_square) == pytest.approx(1.0, abs=1e-3)


def test_corner_mass_is_a_quarter(unit_square: Window, box: KernelSpec, epanechnikov: KernelSpec, gaussian: KernelSpec) -> None:
    corner = np.array([0.0, 0.0])
    assert integrate_over_window(box, corner, 0.1, unit_square) == pytest.approx(0.25, abs=1e-2)
    assert integrate_over_window(epanechnikov, corner, 0.1, unit_square) == pytest.approx(0.25, abs=1e-2)
    assert integrate_over_window(gaussian, corner, 0.1, unit_square) == pytest.approx(0.25, abs=1e-6)


def test_edge_mass_is_a_half(unit_square: Window, epanechnikov: KernelSpec) -> None:
    assert integrate_over_window(epanechnikov, np.array([0.5, 0.0]), 0.2, unit_square) == pytest.approx(0.5, abs=1e-2)


def test_large_bandwidth_mass_scales_like_origin_value(unit_square: Window, gaussian: KernelSpec) -> None:
    h = 1e3
    mass = integrate_over_window(gaussian, np.array([0.5, 0.5]), h, unit_square)
    assert mass * h**2 == pytest.approx(at_origin(gaussian) * unit_square.volume, rel=1e-4)


def test_quadrature_mass_agrees_with_closed_form_for_box(unit_square: Window) -> None:
    # Beta(1e-9) is numerically the box kernel but takes the quadrature path.
    nearly_box = KernelSpec(family=KernelFamily.BETA, gamma=1e-9)
    box = KernelSpec(family=KernelFamily.BETA, gamma=0.0)
    centers = np.array([[0.05, 0.05], [0.5, 0.02], [0.3, 0.7], [0.95, 0.5]])
    quadrature = window_mass(nearly_box, centers, 0.15, unit_square)
    closed = window_mass(box, centers, 0.15, unit_square)
    assert quadrature == pytest.approx(closed, abs=5e-3)


def test_window_mass_in_three_dimensions() -> None:
    cube = Window(lower=(0.0, 0.0, 0.0), upper=(1.0, 1.0, 1.0))
    kernel = KernelSpec(family=KernelFamily.BETA, gamma=1.0, dimension=3)
    masses = window_mass(kernel, np.array([[0.5, 0.5, 0.5], [0.0, 0.0, 0.0]]), 0.1, cube)
    assert masses[0] == pytest.approx(1.0, abs=1e-3)
    assert masses[1] == pytest.approx(0.125, abs=1e-2)


def test_window_mass_rejects_bad_input(unit_square: Window, gaussian: KernelSpec) -> None:
    with pytest.raises(ValueError):
        window_mass(gaussian, np.array([[0.5, 0.5]]), 0.0, unit_square)
    with pytest.raises(ValueError):
        window_mass(KernelSpec(family=KernelFamily.GAUSSIAN, dimension=3), np.zeros((1, 3)), 0.1, unit_square)
