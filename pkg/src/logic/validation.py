from __future__ import annotations

"""Validation helpers for loaded patterns and experiment definitions."""

import math

import numpy as np

from src.domain.schemas import BandwidthMethod, ExperimentConfig, PointPattern
from src.logic.simulate import expected_count

BOUNDARY_TOLERANCE = 1e-12
PAIRWISE_METHODS = {BandwidthMethod.PPL, BandwidthMethod.DIGGLE}


def validate_pattern(pattern: PointPattern) -> list[str]:
    """Collect warnings about a pattern before bandwidth selection.

    Args:
        pattern (PointPattern): Loaded or simulated pattern.

    Returns:
        list[str]: Human-readable validation warnings.
    """
    points = pattern.points
    lower = np.asarray(pattern.window.lower)
    upper = np.asarray(pattern.window.upper)
    duplicates = pattern.count - np.unique(points, axis=0).shape[0] if pattern.count else 0
    near_boundary = int(
        np.count_nonzero(np.any((points - lower < BOUNDARY_TOLERANCE) | (upper - points < BOUNDARY_TOLERANCE), axis=1))
    )
    return [
        *(["Pattern is empty"] if pattern.count == 0 else []),
        *(["Pattern has fewer than two points"] if pattern.count == 1 else []),
        *([f"Pattern has {duplicates} duplicated points"] if duplicates else []),
        *([f"{near_boundary} points lie within {BOUNDARY_TOLERANCE:g} of the boundary"] if near_boundary else []),
    ]


def validate_experiment(config: ExperimentConfig) -> list[str]:
    """Collect warnings about an experiment that will run but may be uninformative.

    Args:
        config (ExperimentConfig): Experiment definition.

    Returns:
        list[str]: Human-readable validation warnings.
    """
    window = config.model.window
    expected = expected_count(config.model)
    diameter = math.sqrt(sum(side * side for side in window.sides))
    warnings = []
    if expected < 2.0 and PAIRWISE_METHODS.intersection(config.methods):
        warnings.append(f"Expected count {expected:.2f} is below two; ppl and diggle will skip many replicates")
    if config.bandwidth_grid.values[-1] > diameter:
        warnings.append(
            f"Largest bandwidth {config.bandwidth_grid.values[-1]:g} exceeds the window diameter {diameter:.3g}"
        )
    return warnings
