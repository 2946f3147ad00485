from __future__ import annotations

"""Seeded samplers for Poisson, Matérn cluster and log-Gaussian Cox patterns."""

import math
from functools import lru_cache
from itertools import product
from typing import Callable, Mapping

import numpy as np
from scipy.interpolate import RegularGridInterpolator  # type: ignore[import-untyped]
from scipy.linalg import LinAlgError, cholesky  # type: ignore[import-untyped]
from scipy.spatial.distance import pdist, squareform  # type: ignore[import-untyped]

from src.config import get_cholesky_jitter, get_field_resolution, get_lgcp_safety
from src.domain.errors import FieldFactorizationError
from src.domain.schemas import (
    GaussianField,
    Grid,
    LogGaussianCox,
    MaternCluster,
    ModelSpec,
    PointPattern,
    PoissonHomogeneous,
    PoissonLinear,
    PoissonModulated,
    ProductDensity,
    Window,
)
from src.logic.estimator import cox_product_density, poisson_product_density
from src.logic.geometry import dilate, make_grid
from src.logic.summaries import lens_area

import logging

logger = logging.getLogger(__name__)

IntensityFunction = Callable[[np.ndarray], np.ndarray]
TrendModel = PoissonHomogeneous | PoissonLinear | PoissonModulated

MODULATION_FREQUENCY = 10.0
JITTER_ATTEMPTS = 6
MODEL_NAMES = (
    "poisson",
    "poisson-linear",
    "poisson-modulated",
    "matern",
    "lgcp",
    "lgcp-linear",
    "lgcp-modulated",
)


def simulate_poisson(
    intensity: IntensityFunction | float,
    window: Window,
    intensity_max: float,
    rng: np.random.Generator,
) -> PointPattern:
    """Simulate a Poisson pattern by thinning a dominating homogeneous pattern.

    Args:
        intensity (IntensityFunction | float): Intensity function or constant.
        window (Window): Observation window.
        intensity_max (float): Upper bound of the intensity on the window.
        rng (np.random.Generator): Random source.

    Returns:
        PointPattern: Simulated pattern.
    """
    if intensity_max < 0.0 or not math.isfinite(intensity_max):
        raise ValueError(f"Dominating intensity must be finite and non-negative, got {intensity_max}")
    if intensity_max == 0.0:
        if callable(intensity) or intensity != 0.0:
            raise ValueError("A zero dominating intensity only admits the zero intensity")
        return _empty_pattern(window)
    count = int(rng.poisson(intensity_max * window.volume))
    candidates = _uniform_points(window, count, rng)
    if not callable(intensity):
        if intensity < 0.0 or intensity > intensity_max:
            raise ValueError(f"Constant intensity {intensity} must lie in [0, {intensity_max}]")
        if intensity == intensity_max:
            return PointPattern(window=window, points=candidates)
        probability = np.full(count, float(intensity) / intensity_max)
    else:
        probability = np.asarray(intensity(candidates), dtype=float) / intensity_max
    return _retain(candidates, probability, window, rng)


def thin(
    pattern: PointPattern,
    retention: IntensityFunction | float,
    rng: np.random.Generator,
) -> PointPattern:
    """Keep each point independently with a location-dependent probability.

    Args:
        pattern (PointPattern): Pattern to thin.
        retention (IntensityFunction | float): Retention probability in [0, 1].
        rng (np.random.Generator): Random source.

    Returns:
        PointPattern: Thinned pattern.
    """
    if callable(retention):
        probability = np.asarray(retention(pattern.points), dtype=float).reshape(-1)
    else:
        probability = np.full(pattern.count, float(retention))
    if np.any(probability < 0.0) or np.any(probability > 1.0) or not np.all(np.isfinite(probability)):
        raise ValueError("Retention probabilities must lie in [0, 1]")
    keep = rng.uniform(size=pattern.count) < probability
    return PointPattern(window=pattern.window, points=pattern.points[keep])


def simulate_matern_cluster(
    parent_intensity: float,
    radius: float,
    mean_offspring: float,
    window: Window,
    rng: np.random.Generator,
) -> PointPattern:
    """Simulate a Matérn cluster pattern with parents on the window dilated by the radius.

    Args:
        parent_intensity (float): Intensity of the parent Poisson process.
        radius (float): Cluster radius.
        mean_offspring (float): Mean offspring count per parent.
        window (Window): Observation window.
        rng (np.random.Generator): Random source.

    Returns:
        PointPattern: Offspring falling inside the window.
    """
    if parent_intensity <= 0.0 or radius <= 0.0 or mean_offspring <= 0.0:
        raise ValueError("Matérn cluster parameters must be positive")
    parent_window = dilate(window, radius)
    parents = simulate_poisson(parent_intensity, parent_window, parent_intensity, rng).points
    counts = rng.poisson(mean_offspring, size=parents.shape[0])
    origins = np.repeat(parents, counts, axis=0)
    offspring = origins + radius * _uniform_in_ball(origins.shape[0], window.dimension, rng)
    inside = window.contains(offspring)
    logger.debug("Matérn cluster: %d parents, %d offspring, %d inside", parents.shape[0], offspring.shape[0], inside.sum())
    return PointPattern(window=window, points=offspring[inside])


def sample_gaussian_field(
    variance: float,
    decay: float,
    grid: Grid,
    rng: np.random.Generator,
) -> GaussianField:
    """Draw a mean-zero field with covariance variance * exp(-decay * distance) on grid nodes.

    Args:
        variance (float): Marginal variance.
        decay (float): Exponential decay rate of the covariance.
        grid (Grid): Nodes carrying the field.
        rng (np.random.Generator): Random source.

    Returns:
        GaussianField: Field values per node.
    """
    if variance <= 0.0 or decay <= 0.0:
        raise ValueError("Field variance and decay must be positive")
    factor = _covariance_factor(grid.signature, variance, decay, get_cholesky_jitter())
    values = factor @ rng.standard_normal(grid.size)
    values.setflags(write=False)
    return GaussianField(grid=grid, values=values, variance=variance, decay=decay)


def field_interpolator(field: GaussianField) -> IntensityFunction:
    """Return a multilinear interpolant of the field, clamped to the node hull."""
    axes = field.grid.axes
    if any(axis.size < 2 for axis in axes):
        raise ValueError("Field interpolation needs at least two nodes per axis")
    interpolator = RegularGridInterpolator(axes, field.values.reshape(field.grid.resolution), method="linear")
    lower = np.asarray([axis[0] for axis in axes])
    upper = np.asarray([axis[-1] for axis in axes])

    def interpolate(points: np.ndarray) -> np.ndarray:
        return interpolator(np.clip(points, lower, upper))

    return interpolate


def interpolation_variance(field: GaussianField, points: np.ndarray) -> np.ndarray:
    """Return the variance of the multilinear field interpolant at each point.

    The interpolant is a weighted sum of the surrounding cell corners, so its
    variance is w' R w with R the corner correlation matrix; it equals the
    field variance at nodes and dips between them.
    """
    grid = field.grid
    lower = np.asarray([axis[0] for axis in grid.axes])
    upper = np.asarray([axis[-1] for axis in grid.axes])
    spacing = np.asarray(grid.spacing)
    coords = np.clip(np.asarray(points, dtype=float).reshape(-1, grid.window.dimension), lower, upper)
    scaled = (coords - lower) / spacing
    cells = np.clip(np.floor(scaled), 0.0, np.asarray(grid.resolution) - 2.0)
    fraction = scaled - cells
    corners = np.asarray(list(product((0, 1), repeat=grid.window.dimension)))
    weights = np.prod(np.where(corners[None, :, :] == 1, fraction[:, None, :], 1.0 - fraction[:, None, :]), axis=2)
    offsets = (corners[:, None, :] - corners[None, :, :]) * spacing
    correlation = np.exp(-field.decay * np.linalg.norm(offsets, axis=2))
    return field.variance * np.einsum("ma,ab,mb->m", weights, correlation, weights)


def simulate_lgcp(
    trend: IntensityFunction,
    variance: float,
    decay: float,
    window: Window,
    field_grid: Grid,
    rng: np.random.Generator,
) -> PointPattern:
    """Simulate a log-Gaussian Cox pattern driven by trend(x) * exp(Z(x)).

    Between nodes the interpolated field is shifted by half its variance
    deficit, so E exp(Z(x)) = exp(variance / 2) holds at every location.

    Args:
        trend (IntensityFunction): Strictly positive trend.
        variance (float): Field variance.
        decay (float): Field covariance decay rate.
        window (Window): Observation window.
        field_grid (Grid): Coarse grid on which the field is sampled.
        rng (np.random.Generator): Random source.

    Returns:
        PointPattern: Simulated pattern.
    """
    if field_grid.window != window:
        raise ValueError("Field grid must cover the observation window")
    field = sample_gaussian_field(variance, decay, field_grid, rng)
    node_trend = np.asarray(trend(field_grid.nodes), dtype=float)
    if np.any(node_trend <= 0.0):
        raise ValueError("Log-Gaussian Cox trend must be strictly positive")
    log_field = field_interpolator(field)
    # The interpolant variance is smallest at the centre of a cell.
    cell_centre = np.asarray([axis[0] for axis in field_grid.axes]) + 0.5 * np.asarray(field_grid.spacing)
    largest_shift = 0.5 * (variance - float(interpolation_variance(field, cell_centre)[0]))
    bound = get_lgcp_safety() * float(node_trend.max()) * math.exp(float(field.values.max()) + largest_shift)
    candidates = _uniform_points(window, int(rng.poisson(bound * window.volume)), rng)
    shift = 0.5 * (variance - interpolation_variance(field, candidates))
    driving = np.asarray(trend(candidates), dtype=float) * np.exp(log_field(candidates) + shift)
    return _retain(candidates, driving / bound, window, rng)


def true_intensity(spec: ModelSpec) -> IntensityFunction:
    """Return the deterministic intensity function of a model.

    Args:
        spec (ModelSpec): Model and window.

    Returns:
        IntensityFunction: Vectorised intensity over (m, d) points.
    """
    model = spec.model
    if isinstance(model, MaternCluster):
        level = model.parent_intensity * model.mean_offspring
        return lambda points: np.full(np.asarray(points).shape[0], level)
    if isinstance(model, LogGaussianCox):
        trend = _trend_function(model.trend)
        scale = math.exp(model.variance / 2.0)
        return lambda points: trend(points) * scale
    return _trend_function(model)


def expected_count(spec: ModelSpec) -> float:
    """Return the integral of the model intensity over its window."""
    model = spec.model
    if isinstance(model, MaternCluster):
        return model.parent_intensity * model.mean_offspring * spec.window.volume
    if isinstance(model, LogGaussianCox):
        return _trend_count(model.trend, spec.window) * math.exp(model.variance / 2.0)
    return _trend_count(model, spec.window)


def product_density(spec: ModelSpec) -> ProductDensity:
    """Return the first and second order structure of a model.

    Args:
        spec (ModelSpec): Model and window.

    Returns:
        ProductDensity: Poisson product form or a Cox form with pair correlation.
    """
    model = spec.model
    intensity = true_intensity(spec)
    if isinstance(model, MaternCluster):
        if spec.window.dimension != 2:
            raise ValueError("The Matérn pair correlation is implemented in the plane")
        radius = model.radius
        scale = model.parent_intensity * math.pi**2 * radius**4

        def matern_correlation(t: np.ndarray) -> np.ndarray:
            overlap = lens_area(np.minimum(t, 2.0 * radius), radius)
            return 1.0 + np.where(t < 2.0 * radius, overlap, 0.0) / scale

        return cox_product_density(intensity, matern_correlation)
    if isinstance(model, LogGaussianCox):
        variance, decay = model.variance, model.decay
        return cox_product_density(intensity, lambda t: np.exp(variance * np.exp(-decay * t)))
    return poisson_product_density(intensity)


def simulate_model(
    spec: ModelSpec,
    rng: np.random.Generator,
    field_resolution: int | None = None,
) -> PointPattern:
    """Simulate one pattern of any model kind.

    Args:
        spec (ModelSpec): Model and window.
        rng (np.random.Generator): Random source.
        field_resolution (int | None): Nodes per axis of the LGCP field grid.

    Returns:
        PointPattern: Simulated pattern.
    """
    model, window = spec.model, spec.window
    if isinstance(model, MaternCluster):
        return simulate_matern_cluster(model.parent_intensity, model.radius, model.mean_offspring, window, rng)
    if isinstance(model, LogGaussianCox):
        _check_trend(model.trend, window)
        per_axis = field_resolution or get_field_resolution()
        field_grid = make_grid(window, (per_axis,) * window.dimension)
        return simulate_lgcp(_trend_function(model.trend), model.variance, model.decay, window, field_grid, rng)
    _check_trend(model, window)
    return simulate_poisson(_trend_function(model), window, _trend_bound(model, window), rng)


def parse_params(text: str) -> dict[str, float]:
    """Parse a ``key=value,key=value`` parameter pack into floats."""
    params: dict[str, float] = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"Parameter {item!r} is not of the form key=value")
        try:
            params[key.strip().lower()] = float(value)
        except ValueError as exc:
            raise ValueError(f"Parameter {key.strip()!r} has non-numeric value {value!r}") from exc
    return params


def parse_model(name: str, params: Mapping[str, float], window: Window) -> ModelSpec:
    """Build a model from its command-line name and parameter pack.

    Args:
        name (str): One of MODEL_NAMES.
        params (Mapping[str, float]): Parameters; keys per model are
            poisson: lambda; poisson-linear: base (10), alpha;
            poisson-modulated: level (alias alpha), amplitude (alias beta);
            matern: kappa, r, mu; lgcp: lambda, sigma2, beta;
            lgcp-linear: base (10), alpha, sigma2, beta;
            lgcp-modulated: level (10), amplitude (2), sigma2, beta.
        window (Window): Observation window.

    Returns:
        ModelSpec: Validated model specification.
    """
    key = name.strip().lower()

    def need(param: str, default: float | None = None, alias: str | None = None) -> float:
        for name in (param, alias):
            if name is not None and name in params:
                return float(params[name])
        if default is not None:
            return default
        raise ValueError(f"Model {key!r} requires parameter {param!r}")

    builders: dict[str, Callable[[], object]] = {
        "poisson": lambda: PoissonHomogeneous(intensity=need("lambda")),
        "poisson-linear": lambda: PoissonLinear(base=need("base", 10.0), slope=need("alpha")),
        "poisson-modulated": lambda: PoissonModulated(
            level=need("level", alias="alpha"), amplitude=need("amplitude", alias="beta")
        ),
        "matern": lambda: MaternCluster(
            parent_intensity=need("kappa"), radius=need("r"), mean_offspring=need("mu")
        ),
        "lgcp": lambda: LogGaussianCox(
            trend=PoissonHomogeneous(intensity=need("lambda")), variance=need("sigma2"), decay=need("beta")
        ),
        "lgcp-linear": lambda: LogGaussianCox(
            trend=PoissonLinear(base=need("base", 10.0), slope=need("alpha")),
            variance=need("sigma2"),
            decay=need("beta"),
        ),
        "lgcp-modulated": lambda: LogGaussianCox(
            trend=PoissonModulated(level=need("level", 10.0), amplitude=need("amplitude", 2.0)),
            variance=need("sigma2"),
            decay=need("beta"),
        ),
    }
    if key not in builders:
        raise ValueError(f"Unknown model {name!r}; expected one of {', '.join(MODEL_NAMES)}")
    spec = ModelSpec.model_validate({"model": builders[key](), "window": window})
    inner = spec.model.trend if isinstance(spec.model, LogGaussianCox) else spec.model
    if not isinstance(inner, MaternCluster):
        _check_trend(inner, window)
    return spec


def _trend_function(model: TrendModel) -> IntensityFunction:
    if isinstance(model, PoissonHomogeneous):
        level = model.intensity
        return lambda points: np.full(np.asarray(points).shape[0], level)
    if isinstance(model, PoissonLinear):
        base, slope = model.base, model.slope
        return lambda points: base + slope * np.asarray(points)[:, 0]
    level, amplitude = model.level, model.amplitude
    return lambda points: level + amplitude * np.cos(MODULATION_FREQUENCY * np.asarray(points)[:, 0])


def _trend_bound(model: TrendModel, window: Window) -> float:
    """Upper bound of a trend over the window."""
    if isinstance(model, PoissonHomogeneous):
        return model.intensity
    if isinstance(model, PoissonLinear):
        return max(model.base + model.slope * window.lower[0], model.base + model.slope * window.upper[0])
    return model.level + abs(model.amplitude)


def _check_trend(model: TrendModel, window: Window) -> None:
    """Reject linear trends that turn negative on the window."""
    if isinstance(model, PoissonLinear):
        low = min(model.base + model.slope * window.lower[0], model.base + model.slope * window.upper[0])
        if low < 0.0:
            raise ValueError(f"Linear trend becomes negative on the window (minimum {low})")


def _trend_count(model: TrendModel, window: Window) -> float:
    """Closed-form integral of a trend over the window."""
    if isinstance(model, PoissonHomogeneous):
        return model.intensity * window.volume
    low, high = window.lower[0], window.upper[0]
    side = high - low
    if isinstance(model, PoissonLinear):
        return window.volume * (model.base + model.slope * 0.5 * (low + high))
    wave = (math.sin(MODULATION_FREQUENCY * high) - math.sin(MODULATION_FREQUENCY * low)) / MODULATION_FREQUENCY
    return window.volume / side * (model.level * side + model.amplitude * wave)


@lru_cache(maxsize=8)
def _covariance_factor(
    signature: tuple[Window, tuple[int, ...]],
    variance: float,
    decay: float,
    jitter: float,
) -> np.ndarray:
    """Lower Cholesky factor of the exponential covariance on a grid, cached per grid and parameters."""
    window, resolution = signature
    nodes = make_grid(window, resolution).nodes
    covariance = variance * np.exp(-decay * squareform(pdist(nodes)))
    diagonal = np.eye(nodes.shape[0])
    for attempt in range(JITTER_ATTEMPTS):
        scale = jitter * 10.0**attempt * variance
        try:
            factor = cholesky(covariance + scale * diagonal, lower=True)
        except LinAlgError:
            logger.debug("Cholesky failed with jitter %.1e, retrying", scale)
            continue
        factor.setflags(write=False)
        logger.debug("Factorized %d-node covariance (variance %.4g, decay %.4g)", nodes.shape[0], variance, decay)
        return factor
    raise FieldFactorizationError(f"Covariance on {resolution} grid is not positive definite after jitter")


def _uniform_points(window: Window, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw uniform points strictly inside the window."""
    lower = np.asarray(window.lower)
    sides = np.asarray(window.sides)
    points = lower + sides * rng.uniform(size=(count, window.dimension))
    # The open window excludes the lower boundary that uniform() can hit.
    outside = ~window.contains(points)
    while np.any(outside):
        points[outside] = lower + sides * rng.uniform(size=(int(outside.sum()), window.dimension))
        outside = ~window.contains(points)
    return points


def _uniform_in_ball(count: int, dimension: int, rng: np.random.Generator) -> np.ndarray:
    """Draw uniform points in the closed unit ball."""
    directions = rng.standard_normal(size=(count, dimension))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = rng.uniform(size=(count, 1)) ** (1.0 / dimension)
    return directions / norms * radii


def _retain(
    candidates: np.ndarray,
    probability: np.ndarray,
    window: Window,
    rng: np.random.Generator,
) -> PointPattern:
    """Independently keep candidates with the given probabilities."""
    if np.any(probability < 0.0):
        raise ValueError("Intensity must be non-negative on the window")
    excess = int(np.count_nonzero(probability > 1.0))
    if excess:
        logger.warning("Thinning bound exceeded at %d of %d candidates; probabilities clipped", excess, probability.size)
    keep = rng.uniform(size=probability.size) < np.clip(probability, 0.0, 1.0)
    return PointPattern(window=window, points=candidates[keep])


def _empty_pattern(window: Window) -> PointPattern:
    return PointPattern(window=window, points=np.empty((0, window.dimension)))
