from __future__ import annotations

"""Configuration loader for the application."""

import os
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


DEFAULT_EDGE_RESOLUTION = 256
DEFAULT_RASTER_CHUNK = 4096
DEFAULT_H_MIN = 0.01
DEFAULT_H_MAX = 1.5
DEFAULT_H_COUNT = 128
DEFAULT_EVAL_RESOLUTION = 128
DEFAULT_TMAX_FACTOR = 2.0
DEFAULT_T_POINTS = 512
DEFAULT_K_RANGE_FRACTION = 0.25
DEFAULT_K_RANGE_PAIRS = 1000.0
DEFAULT_FIELD_RESOLUTION = 64
DEFAULT_LGCP_SAFETY = 1.05
DEFAULT_CHOLESKY_JITTER = 1e-10
DEFAULT_THREADS = 0

_CONFIG_CACHE: dict[str, Any] | None = None


def load_config() -> dict[str, Any]:
    """Load configuration from the repository root config file.

    Args:
        None

    Returns:
        dict[str, Any]: Parsed configuration values.
    """
    global _CONFIG_CACHE
    if _CONFIG_CACHE is not None:
        return _CONFIG_CACHE
    config_path = Path(__file__).resolve().parents[1] / "config.toml"
    _CONFIG_CACHE = (
        tomllib.loads(config_path.read_text(encoding="utf-8")) if config_path.exists() else {}
    )
    return _CONFIG_CACHE


def _section(name: str) -> dict[str, Any]:
    """Return a config section as a dict, empty when missing."""
    config = load_config()
    section = config.get(name, {}) if isinstance(config, dict) else {}
    return section if isinstance(section, dict) else {}


def get_edge_resolution() -> int:
    """Return the per-axis node count of the edge-correction quadrature grid.

    Args:
        None

    Returns:
        int: Nodes per axis of the kernel-support grid.
    """
    value = coerce_int(_section("quadrature").get("edge_resolution"), DEFAULT_EDGE_RESOLUTION)
    return max(value, 2)


def get_raster_chunk_size() -> int:
    """Return the number of query rows evaluated per raster block."""
    value = coerce_int(_section("quadrature").get("raster_chunk"), DEFAULT_RASTER_CHUNK)
    return max(value, 1)


def get_bandwidth_grid_spec() -> tuple[float, float, int]:
    """Return the default candidate bandwidth range.

    Args:
        None

    Returns:
        tuple[float, float, int]: Smallest value, largest value and count.
    """
    bandwidth = _section("bandwidth")
    return (
        coerce_float(bandwidth.get("h_min"), DEFAULT_H_MIN),
        coerce_float(bandwidth.get("h_max"), DEFAULT_H_MAX),
        coerce_int(bandwidth.get("count"), DEFAULT_H_COUNT),
    )


def get_eval_resolution() -> int:
    """Return the per-axis resolution of the evaluation grid."""
    return coerce_int(_section("evaluation").get("grid_resolution"), DEFAULT_EVAL_RESOLUTION)


def get_k_tmax_factor() -> float:
    """Return the multiple of the largest bandwidth used as K-function range."""
    return coerce_float(_section("summaries").get("tmax_factor"), DEFAULT_TMAX_FACTOR)


def get_k_range_rule() -> tuple[float, float]:
    """Return the K-function range rule: fraction of the shortest side and expected pair count.

    Args:
        None

    Returns:
        tuple[float, float]: Side fraction and pair count, both positive.
    """
    summaries = _section("summaries")
    fraction = coerce_float(summaries.get("k_range_fraction"), DEFAULT_K_RANGE_FRACTION)
    pairs = coerce_float(summaries.get("k_range_pairs"), DEFAULT_K_RANGE_PAIRS)
    return (
        fraction if fraction > 0.0 else DEFAULT_K_RANGE_FRACTION,
        pairs if pairs > 0.0 else DEFAULT_K_RANGE_PAIRS,
    )


def get_k_points() -> int:
    """Return the number of distances on which K-function tables are written."""
    return coerce_int(_section("summaries").get("t_points"), DEFAULT_T_POINTS)


def get_field_resolution() -> int:
    """Return the per-axis resolution of the Gaussian random field grid.

    Args:
        None

    Returns:
        int: Nodes per axis used when sampling log-Gaussian Cox fields.
    """
    return coerce_int(_section("simulation").get("field_resolution"), DEFAULT_FIELD_RESOLUTION)


def get_lgcp_safety() -> float:
    """Return the multiplicative margin on thinning bounds taken from grid maxima."""
    return coerce_float(_section("simulation").get("lgcp_safety"), DEFAULT_LGCP_SAFETY)


def get_cholesky_jitter() -> float:
    """Return the diagonal jitter added before covariance factorization."""
    return coerce_float(_section("simulation").get("cholesky_jitter"), DEFAULT_CHOLESKY_JITTER)


def get_default_threads() -> int:
    """Return the worker count, resolving 0 to the available CPUs.

    Args:
        None

    Returns:
        int: Positive worker count.
    """
    threads = coerce_int(_section("parallel").get("threads"), DEFAULT_THREADS)
    return resolve_threads(threads)


def resolve_threads(threads: int | None) -> int:
    """Map a requested worker count to a positive value (0 or None = all CPUs)."""
    if threads is None or threads <= 0:
        return os.cpu_count() or 1
    return threads


def coerce_float(value: object, default: float) -> float:
    """Coerce a value to float with a default fallback.

    Args:
        value (object): Raw value to convert.
        default (float): Default to return on error.

    Returns:
        float: Parsed float or default.
    """
    if value is None or isinstance(value, bool):
        return default
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return default
    return default


def coerce_int(value: object, default: int) -> int:
    """Coerce a value to int with a default fallback."""
    if value is None or isinstance(value, bool):
        return default
    if isinstance(value, (int, float)):
        return int(value)
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            return default
    return default
