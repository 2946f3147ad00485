from __future__ import annotations

"""Beta and Gaussian kernels, and the window mass used for edge correction."""

import math
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, ndtr  # type: ignore[import-untyped]

from src.config import get_edge_resolution
from src.domain.schemas import Grid, KernelFamily, KernelSpec, Window
from src.logic.geometry import disc_rectangle_area, make_grid

import logging

logger = logging.getLogger(__name__)

GAUSSIAN_SUPPORT = 8.0
MAX_RESOLUTION_3D = 32
MASS_CEILING = 1.0 + 1e-12

KERNEL_ALIASES = {
    "box": (KernelFamily.BETA, 0.0),
    "uniform": (KernelFamily.BETA, 0.0),
    "epanechnikov": (KernelFamily.BETA, 1.0),
    "gaussian": (KernelFamily.GAUSSIAN, 0.0),
}


def parse_kernel(text: str, dimension: int = 2) -> KernelSpec:
    """Parse a kernel name such as ``box``, ``epanechnikov``, ``beta:2`` or ``gaussian``.

    Args:
        text (str): Kernel name from the command line or a config file.
        dimension (int): Spatial dimension of the kernel.

    Returns:
        KernelSpec: Parsed kernel specification.
    """
    name = text.strip().lower()
    if name in KERNEL_ALIASES:
        family, gamma = KERNEL_ALIASES[name]
        return KernelSpec(family=family, gamma=gamma, dimension=dimension)
    if name.startswith("beta:"):
        try:
            gamma = float(name.split(":", 1)[1])
        except ValueError as exc:
            raise ValueError(f"Invalid Beta kernel exponent in {text!r}") from exc
        return KernelSpec(family=KernelFamily.BETA, gamma=gamma, dimension=dimension)
    raise ValueError(f"Unknown kernel {text!r}; expected box, epanechnikov, beta:<gamma> or gaussian")


def at_origin(kernel: KernelSpec) -> float:
    """Return the kernel's maximum value, attained at the origin."""
    d = kernel.dimension
    if kernel.family is KernelFamily.GAUSSIAN:
        return (2.0 * math.pi) ** (-d / 2.0)
    gamma = kernel.gamma
    return math.exp(gammaln(d / 2.0 + gamma + 1.0) - (d / 2.0) * math.log(math.pi) - gammaln(gamma + 1.0))


def support_radius(kernel: KernelSpec) -> float:
    """Return the radius (in kernel units) beyond which the kernel is treated as zero."""
    return GAUSSIAN_SUPPORT if kernel.family is KernelFamily.GAUSSIAN else 1.0


def radial_profile(kernel: KernelSpec, squared_norm: np.ndarray) -> np.ndarray:
    """Evaluate the kernel from squared Euclidean norms.

    Args:
        kernel (KernelSpec): Kernel to evaluate.
        squared_norm (np.ndarray): Values of x'x.

    Returns:
        np.ndarray: Kernel values with the same shape as the input.
    """
    squared = np.asarray(squared_norm, dtype=float)
    constant = at_origin(kernel)
    if kernel.family is KernelFamily.GAUSSIAN:
        return constant * np.exp(-0.5 * squared)
    inside = squared <= 1.0
    base = np.clip(1.0 - squared, 0.0, None)
    return np.where(inside, constant * np.power(base, kernel.gamma), 0.0)


def evaluate(kernel: KernelSpec, x: np.ndarray) -> np.ndarray | float:
    """Evaluate the kernel at one point or an (m, d) array of points.

    Args:
        kernel (KernelSpec): Kernel to evaluate.
        x (np.ndarray): Point or points in kernel units.

    Returns:
        np.ndarray | float: Density values; a float for a single point.
    """
    coords = np.asarray(x, dtype=float)
    if coords.shape[-1] != kernel.dimension:
        raise ValueError(f"Point dimension {coords.shape[-1]} does not match kernel dimension {kernel.dimension}")
    values = radial_profile(kernel, np.sum(coords * coords, axis=-1))
    return float(values) if coords.ndim == 1 else values


def support_grid(kernel: KernelSpec, resolution: int | None = None) -> Grid:
    """Build the midpoint grid over the kernel's support box in kernel units.

    Args:
        kernel (KernelSpec): Kernel whose support is covered.
        resolution (int | None): Nodes per axis, defaults to the configured edge resolution.

    Returns:
        Grid: Grid over [-R, R]^d.
    """
    per_axis = resolution if resolution is not None else get_edge_resolution()
    if kernel.dimension >= 3:
        per_axis = min(per_axis, MAX_RESOLUTION_3D)
    radius = support_radius(kernel)
    box = Window(lower=(-radius,) * kernel.dimension, upper=(radius,) * kernel.dimension)
    return make_grid(box, (per_axis,) * kernel.dimension)


@lru_cache(maxsize=32)
def _reference_mass(kernel: KernelSpec, resolution: int | None) -> tuple[np.ndarray, np.ndarray, float]:
    """Return normalised kernel cell masses, per-axis node coordinates and spacing."""
    grid = support_grid(kernel, resolution)
    masses = radial_profile(kernel, np.sum(grid.nodes**2, axis=1)) * grid.cell_volume
    masses = (masses / masses.sum()).reshape(grid.resolution)
    masses.setflags(write=False)
    logger.debug("Cached %s support masses at resolution %s", kernel.label, grid.resolution)
    return masses, grid.axes[0], grid.spacing[0]


def window_mass(
    kernel: KernelSpec,
    centers: np.ndarray,
    h: float,
    window: Window,
    resolution: int | None = None,
) -> np.ndarray:
    """Return h^-d times the integral of kappa((c - u) / h) over the window for each centre.

    Args:
        kernel (KernelSpec): Kernel to integrate.
        centers (np.ndarray): (m, d) kernel centres.
        h (float): Bandwidth.
        window (Window): Integration domain.
        resolution (int | None): Support-grid nodes per axis for quadrature kernels.

    Returns:
        np.ndarray: Masses in [0, 1], one per centre.
    """
    if h <= 0.0:
        raise ValueError(f"Bandwidth must be positive, got {h}")
    coords = np.asarray(centers, dtype=float).reshape(-1, kernel.dimension)
    if kernel.dimension != window.dimension:
        raise ValueError("Kernel and window dimensions differ")
    lower = np.asarray(window.lower)
    upper = np.asarray(window.upper)
    if kernel.family is KernelFamily.GAUSSIAN:
        mass = np.prod(ndtr((upper - coords) / h) - ndtr((lower - coords) / h), axis=1)
    elif kernel.gamma == 0.0 and kernel.dimension == 2:
        mass = disc_rectangle_area(coords, h, window) / (math.pi * h * h)
    else:
        mass = _quadrature_mass(kernel, coords, h, lower, upper, resolution)
    return np.clip(mass, 0.0, MASS_CEILING)


def _quadrature_mass(
    kernel: KernelSpec,
    coords: np.ndarray,
    h: float,
    lower: np.ndarray,
    upper: np.ndarray,
    resolution: int | None,
) -> np.ndarray:
    """Contract normalised support masses with per-axis window coverage fractions."""
    masses, nodes, spacing = _reference_mass(kernel, resolution)
    half = 0.5 * spacing * h
    fractions = []
    for axis in range(kernel.dimension):
        centres = coords[:, axis, None] + h * nodes[None, :]
        overlap = np.minimum(centres + half, upper[axis]) - np.maximum(centres - half, lower[axis])
        fractions.append(np.clip(overlap / (2.0 * half), 0.0, 1.0))
    contracted = np.tensordot(fractions[0], masses, axes=(1, 0))
    for fraction in fractions[1:]:
        contracted = np.einsum("mj...,mj->m...", contracted, fraction)
    return contracted


def integrate_over_window(
    kernel: KernelSpec,
    center: np.ndarray,
    h: float,
    window: Window,
    resolution: int | None = None,
) -> float:
    """Return the window mass of a single kernel centre."""
    return float(window_mass(kernel, np.asarray(center, dtype=float)[None, :], h, window, resolution)[0])
