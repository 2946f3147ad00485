from __future__ import annotations

"""Tests for the seeded pattern simulators and model descriptions."""

import logging
import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.domain.errors import FieldFactorizationError
from src.domain.schemas import (
    LogGaussianCox,
    MaternCluster,
    ModelSpec,
    PointPattern,
    PoissonHomogeneous,
    PoissonLinear,
    PoissonModulated,
    RngStream,
    Window,
)
from src.logic import simulate
from src.logic.geometry import make_grid
from src.logic.simulate import (
    MODEL_NAMES,
    expected_count,
    field_interpolator,
    interpolation_variance,
    parse_model,
    parse_params,
    product_density,
    sample_gaussian_field,
    simulate_lgcp,
    simulate_matern_cluster,
    simulate_model,
    simulate_poisson,
    thin,
    true_intensity,
)


def _spec(model: object, window: Window) -> ModelSpec:
    return ModelSpec.model_validate({"model": model, "window": window})


def test_rng_streams_are_reproducible_and_independent() -> None:
    first = RngStream(seed=3, stream_id=1).generator().uniform(size=4)
    again = RngStream(seed=3, stream_id=1).generator().uniform(size=4)
    other = RngStream(seed=3, stream_id=2).generator().uniform(size=4)
    substream = RngStream(seed=3, stream_id=1).generator(0).uniform(size=4)
    assert np.array_equal(first, again)
    assert not np.array_equal(first, other)
    assert not np.array_equal(first, substream)


def test_poisson_count_is_reproducible(unit_square: Window) -> None:
    first = simulate_poisson(50.0, unit_square, 50.0, RngStream(seed=10).generator())
    second = simulate_poisson(50.0, unit_square, 50.0, RngStream(seed=10).generator())
    assert first == second
    assert np.all(unit_square.contains(first.points))


def test_poisson_mean_count(unit_square: Window) -> None:
    stream = RngStream(seed=12)
    counts = [simulate_poisson(50.0, unit_square, 50.0, stream.generator(index)).count for index in range(400)]
    assert float(np.mean(counts)) == pytest.approx(50.0, abs=3.0 * math.sqrt(50.0 / 400))


def test_zero_intensity_gives_empty_pattern(unit_square: Window) -> None:
    pattern = simulate_poisson(0.0, unit_square, 0.0, RngStream(seed=1).generator())
    assert pattern.count == 0
    assert pattern.points.shape == (0, 2)


def test_poisson_rejects_bad_bounds(unit_square: Window) -> None:
    rng = RngStream(seed=1).generator()
    with pytest.raises(ValueError):
        simulate_poisson(10.0, unit_square, 5.0, rng)
    with pytest.raises(ValueError):
        simulate_poisson(10.0, unit_square, -1.0, rng)


def test_thinning_warns_when_bound_is_exceeded(unit_square: Window, caplog: pytest.LogCaptureFixture) -> None:
    caplog.set_level(logging.WARNING)
    pattern = simulate_poisson(lambda points: np.full(points.shape[0], 20.0), unit_square, 10.0, RngStream(seed=2).generator())
    assert pattern.count > 0
    assert "probabilities clipped" in caplog.text


def test_linear_trend_shifts_points_right(unit_square: Window) -> None:
    spec = _spec(PoissonLinear(base=10.0, slope=480.0), unit_square)
    pattern = simulate_model(spec, RngStream(seed=4).generator())
    # Density proportional to 10 + 480 x has mean (5 + 160) / (10 + 240).
    assert float(pattern.points[:, 0].mean()) == pytest.approx(165.0 / 250.0, abs=0.05)


def test_thin_bounds(unit_square: Window, poisson_pattern: PointPattern) -> None:
    rng = RngStream(seed=5).generator()
    assert thin(poisson_pattern, 1.0, rng) == poisson_pattern
    assert thin(poisson_pattern, 0.0, rng).count == 0
    with pytest.raises(ValueError):
        thin(poisson_pattern, 1.5, rng)


def test_matern_cluster_count(unit_square: Window) -> None:
    stream = RngStream(seed=6)
    counts = [
        simulate_matern_cluster(10.0, 0.1, 3.0, unit_square, stream.generator(index)).count for index in range(300)
    ]
    assert float(np.mean(counts)) == pytest.approx(30.0, rel=0.1)


def test_matern_cluster_offspring_lie_near_parents(unit_square: Window) -> None:
    pattern = simulate_matern_cluster(5.0, 0.05, 40.0, unit_square, RngStream(seed=9).generator())
    assert pattern.count > 0
    nearest = np.sort(np.linalg.norm(pattern.points[:, None, :] - pattern.points[None, :, :], axis=2), axis=1)[:, 1]
    assert float(np.median(nearest)) < 0.05


def test_gaussian_field_statistics(unit_square: Window) -> None:
    grid = make_grid(unit_square, (16, 16))
    values = np.stack(
        [sample_gaussian_field(2.0, 5.0, grid, RngStream(seed=21).generator(index)).values for index in range(2000)]
    )
    assert float(values.var(axis=0).mean()) == pytest.approx(2.0, rel=0.1)
    first, second = values[:, 0], values[:, 1]
    distance = float(np.linalg.norm(grid.nodes[0] - grid.nodes[1]))
    covariance = float(np.mean(first * second))
    assert covariance == pytest.approx(2.0 * math.exp(-5.0 * distance), abs=0.3)


def test_gaussian_field_rejects_bad_parameters(unit_square: Window) -> None:
    grid = make_grid(unit_square, (4, 4))
    with pytest.raises(ValueError):
        sample_gaussian_field(0.0, 5.0, grid, RngStream(seed=1).generator())


def test_factorization_failure_is_reported(unit_square: Window, monkeypatch: pytest.MonkeyPatch) -> None:
    def always_fails(*args: object, **kwargs: object) -> np.ndarray:
        raise np.linalg.LinAlgError("not positive definite")

    monkeypatch.setattr(simulate, "cholesky", always_fails)
    simulate._covariance_factor.cache_clear()
    grid = make_grid(unit_square, (3, 3))
    with pytest.raises(FieldFactorizationError):
        sample_gaussian_field(1.0, 2.0, grid, RngStream(seed=1).generator())
    simulate._covariance_factor.cache_clear()


def test_field_interpolator_reproduces_nodes_and_clamps(unit_square: Window) -> None:
    grid = make_grid(unit_square, (8, 8))
    field = sample_gaussian_field(1.0, 3.0, grid, RngStream(seed=2).generator())
    interpolate = field_interpolator(field)
    assert interpolate(grid.nodes) == pytest.approx(field.values)
    corner = interpolate(np.array([[0.0, 0.0]]))
    assert corner[0] == pytest.approx(field.values[0])
    with pytest.raises(ValueError):
        field_interpolator(sample_gaussian_field(1.0, 3.0, make_grid(unit_square, (1, 4)), RngStream(seed=2).generator()))


def test_interpolation_variance_matches_field_variance_at_nodes(unit_square: Window) -> None:
    grid = make_grid(unit_square, (8, 8))
    field = sample_gaussian_field(1.5, 10.0, grid, RngStream(seed=3).generator())
    assert interpolation_variance(field, grid.nodes) == pytest.approx(np.full(grid.size, 1.5))
    step = 1.0 / 8.0
    centre = np.array([[2.0 * step, 3.0 * step]])
    expected = 1.5 / 4.0 * (1.0 + 2.0 * math.exp(-10.0 * step) + math.exp(-10.0 * step * math.sqrt(2.0)))
    assert interpolation_variance(field, centre)[0] == pytest.approx(expected)
    assert interpolation_variance(field, np.array([[0.0, 0.0]]))[0] == pytest.approx(1.5)


def test_lgcp_mean_count(unit_square: Window) -> None:
    spec = _spec(LogGaussianCox(trend=PoissonHomogeneous(intensity=10.0), variance=2.0 * math.log(2.0), decay=10.0), unit_square)
    stream = RngStream(seed=31)
    counts = [simulate_model(spec, stream.generator(index), field_resolution=16).count for index in range(300)]
    assert float(np.mean(counts)) == pytest.approx(expected_count(spec), rel=0.08)


def test_lgcp_rejects_foreign_field_grid(unit_square: Window) -> None:
    other = make_grid(Window(lower=(0.0, 0.0), upper=(2.0, 2.0)), (4, 4))
    with pytest.raises(ValueError):
        simulate_lgcp(lambda points: np.ones(points.shape[0]), 1.0, 1.0, unit_square, other, RngStream(seed=1).generator())


def test_true_intensity_and_expected_count(unit_square: Window) -> None:
    linear = _spec(PoissonLinear(base=10.0, slope=80.0), unit_square)
    assert true_intensity(linear)(np.array([[0.5, 0.2]]))[0] == pytest.approx(50.0)
    assert expected_count(linear) == pytest.approx(50.0)
    modulated = _spec(PoissonModulated(level=50.0, amplitude=20.0), unit_square)
    assert expected_count(modulated) == pytest.approx(50.0 + 20.0 * math.sin(10.0) / 10.0)
    cluster = _spec(MaternCluster(parent_intensity=10.0, radius=0.1, mean_offspring=3.0), unit_square)
    assert expected_count(cluster) == pytest.approx(30.0)
    cox = _spec(LogGaussianCox(trend=PoissonHomogeneous(intensity=10.0), variance=2.0 * math.log(5.0), decay=50.0), unit_square)
    assert expected_count(cox) == pytest.approx(50.0)
    assert true_intensity(cox)(np.array([[0.3, 0.3]]))[0] == pytest.approx(50.0)


def test_product_densities(unit_square: Window) -> None:
    points = np.array([[0.2, 0.2], [0.25, 0.2], [0.9, 0.9]])
    poisson = product_density(_spec(PoissonHomogeneous(intensity=10.0), unit_square))
    assert poisson.factorizes
    assert poisson.second_order(points, points) == pytest.approx(np.full((3, 3), 100.0))
    cluster = product_density(_spec(MaternCluster(parent_intensity=10.0, radius=0.1, mean_offspring=3.0), unit_square))
    correlation = cluster.pair_correlation(points, points)
    assert correlation[0, 0] == pytest.approx(1.0 + 1.0 / (10.0 * math.pi * 0.01))
    assert correlation[0, 2] == pytest.approx(1.0)
    cox = product_density(
        _spec(LogGaussianCox(trend=PoissonHomogeneous(intensity=10.0), variance=1.0, decay=10.0), unit_square)
    )
    assert cox.pair_correlation(points, points)[0, 1] == pytest.approx(math.exp(math.exp(-0.5)))


def test_parse_params_and_model(unit_square: Window) -> None:
    assert parse_params("kappa=10, r=0.1,mu=3") == {"kappa": 10.0, "r": 0.1, "mu": 3.0}
    assert parse_params("") == {}
    with pytest.raises(ValueError):
        parse_params("kappa")
    with pytest.raises(ValueError):
        parse_params("kappa=ten")
    spec = parse_model("lgcp-linear", {"alpha": 80.0, "sigma2": 1.0, "beta": 10.0}, unit_square)
    assert isinstance(spec.model, LogGaussianCox)
    assert spec.model.trend == PoissonLinear(base=10.0, slope=80.0)
    for name in MODEL_NAMES:
        params = {"lambda": 10.0, "alpha": 1.0, "beta": 1.0, "kappa": 5.0, "r": 0.1, "mu": 2.0}
        params |= {"sigma2": 1.0, "level": 10.0, "amplitude": 2.0}
        assert parse_model(name, params, unit_square).window == unit_square
    with pytest.raises(ValueError):
        parse_model("strauss", {}, unit_square)
    with pytest.raises(ValueError):
        parse_model("matern", {"kappa": 10.0}, unit_square)
    with pytest.raises(ValueError):
        parse_model("poisson-linear", {"base": 10.0, "alpha": -20.0}, unit_square)


def test_modulated_models_share_trend_parameters(unit_square: Window) -> None:
    trend = {"level": 50.0, "amplitude": 20.0}
    poisson = parse_model("poisson-modulated", trend, unit_square)
    assert poisson.model == PoissonModulated(level=50.0, amplitude=20.0)
    assert parse_model("poisson-modulated", {"alpha": 50.0, "beta": 20.0}, unit_square) == poisson
    lgcp = parse_model("lgcp-modulated", trend | {"sigma2": 1.0, "beta": 10.0}, unit_square)
    assert isinstance(lgcp.model, LogGaussianCox)
    assert lgcp.model.trend == poisson.model
    assert lgcp.model.decay == 10.0
    default = parse_model("lgcp-modulated", {"sigma2": 1.0, "beta": 10.0}, unit_square)
    assert isinstance(default.model, LogGaussianCox)
    assert default.model.trend == PoissonModulated(level=10.0, amplitude=2.0)


def test_modulated_level_must_dominate() -> None:
    with pytest.raises(ValidationError):
        PoissonModulated(level=1.0, amplitude=2.0)


def test_simulation_on_the_line_and_in_space() -> None:
    line = Window(lower=(0.0,), upper=(2.0,))
    pattern = simulate_model(_spec(PoissonHomogeneous(intensity=20.0), line), RngStream(seed=1).generator())
    assert pattern.points.shape[1] == 1
    cube = Window(lower=(0.0, 0.0, 0.0), upper=(1.0, 1.0, 1.0))
    cluster = simulate_model(_spec(MaternCluster(parent_intensity=5.0, radius=0.1, mean_offspring=4.0), cube), RngStream(seed=1).generator())
    assert cluster.points.shape[1] == 3
