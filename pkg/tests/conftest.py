from __future__ import annotations

from pathlib import Path
import sys
from typing import Callable

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.append(str(ROOT))

from src.domain.schemas import KernelFamily, KernelSpec, PointPattern, RngStream, Window  # noqa: E402
from src.logic.simulate import simulate_poisson  # noqa: E402


@pytest.fixture
def unit_square() -> Window:
    """The observation window [0, 1]^2."""
    return Window(lower=(0.0, 0.0), upper=(1.0, 1.0))


@pytest.fixture
def gaussian() -> KernelSpec:
    return KernelSpec(family=KernelFamily.GAUSSIAN)


@pytest.fixture
def box() -> KernelSpec:
    return KernelSpec(family=KernelFamily.BETA, gamma=0.0)


@pytest.fixture
def epanechnikov() -> KernelSpec:
    return KernelSpec(family=KernelFamily.BETA, gamma=1.0)


@pytest.fixture
def poisson_pattern(unit_square: Window) -> PointPattern:
    """A seeded homogeneous Poisson pattern with intensity 50 on the unit square."""
    rng = RngStream(seed=20240601).generator()
    return simulate_poisson(50.0, unit_square, 50.0, rng)


@pytest.fixture
def small_patterns(unit_square: Window) -> list[PointPattern]:
    """Seeded uniform patterns with 1, 2, 5, 20 and 100 points."""
    rng = RngStream(seed=7).generator()
    return [
        PointPattern(window=unit_square, points=0.02 + 0.96 * rng.uniform(size=(count, 2)))
        for count in (1, 2, 5, 20, 100)
    ]


@pytest.fixture
def make_pattern(unit_square: Window) -> Callable[..., PointPattern]:
    """Build a unit-square pattern from literal coordinates."""

    def build(*points: tuple[float, float]) -> PointPattern:
        return PointPattern(window=unit_square, points=np.asarray(points, dtype=float).reshape(-1, 2))

    return build
