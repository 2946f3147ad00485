from __future__ import annotations

import math
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        def __str__(self) -> str:
            return str(self.value)

        def __format__(self, format_spec: str) -> str:
            return str.__format__(str(self.value), format_spec)

        @staticmethod
        def _generate_next_value_(name, start, count, last_values):
            return name.lower()
from typing import Annotated, Any, Callable, Literal, Mapping, Union

import numpy as np
from more_itertools import pairwise
from pydantic import BaseModel, Field, ValidationInfo, field_validator, model_validator


IntensityFunction = Callable[[np.ndarray], np.ndarray]
PairFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _frozen_array(array: np.ndarray) -> np.ndarray:
    """Return a read-only float copy of an array."""
    frozen = np.array(array, dtype=float, copy=True)
    frozen.setflags(write=False)
    return frozen


class Window(BaseModel):
    model_config = {"frozen": True}

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    @model_validator(mode="after")
    def _check_bounds(self) -> Window:
        if not self.lower or len(self.lower) != len(self.upper):
            raise ValueError("Window bounds must be non-empty and of equal length")
        if not all(math.isfinite(value) for value in (*self.lower, *self.upper)):
            raise ValueError("Window bounds must be finite")
        if any(low >= high for low, high in zip(self.lower, self.upper)):
            raise ValueError(f"Window lower bounds {self.lower} must lie below upper bounds {self.upper}")
        return self

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def sides(self) -> tuple[float, ...]:
        return tuple(high - low for low, high in zip(self.lower, self.upper))

    @property
    def volume(self) -> float:
        return math.prod(self.sides)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Return open-window membership for an (n, d) array of points."""
        coords = np.asarray(points, dtype=float).reshape(-1, self.dimension)
        lower = np.asarray(self.lower)
        upper = np.asarray(self.upper)
        return np.all((coords > lower) & (coords < upper), axis=1)


class PointPattern(BaseModel):
    model_config = {"frozen": True, "arbitrary_types_allowed": True}

    window: Window
    points: np.ndarray

    @field_validator("points", mode="before")
    @classmethod
    def _as_array(cls, value: Any, info: ValidationInfo) -> np.ndarray:
        window = info.data.get("window")
        dimension = window.dimension if isinstance(window, Window) else None
        array = np.asarray(value, dtype=float)
        if array.size == 0:
            return _frozen_array(np.empty((0, dimension or 2)))
        # A flat array is only unambiguous on the line.
        if array.ndim == 1 and dimension == 1:
            array = array.reshape(-1, 1)
        if array.ndim != 2:
            raise ValueError(f"Points must form an (n, d) array, got shape {array.shape}")
        return _frozen_array(array)

    @model_validator(mode="after")
    def _check_inside(self) -> PointPattern:
        if self.points.shape[1] != self.window.dimension:
            raise ValueError(
                f"Point dimension {self.points.shape[1]} does not match window dimension {self.window.dimension}"
            )
        if not np.all(np.isfinite(self.points)):
            raise ValueError("Point coordinates must be finite")
        outside = ~self.window.contains(self.points)
        if np.any(outside):
            raise ValueError(f"{int(outside.sum())} points lie outside the open window")
        return self

    @property
    def count(self) -> int:
        return int(self.points.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PointPattern):
            return NotImplemented
        return self.window == other.window and np.array_equal(self.points, other.points)

    __hash__ = None  # type: ignore[assignment]


class Grid(BaseModel):
    model_config = {"frozen": True, "arbitrary_types_allowed": True}

    window: Window
    resolution: tuple[int, ...]
    nodes: np.ndarray
    cell_volume: float

    @model_validator(mode="after")
    def _check_shape(self) -> Grid:
        if len(self.resolution) != self.window.dimension:
            raise ValueError("Grid resolution must have one entry per window axis")
        if any(count < 1 for count in self.resolution):
            raise ValueError(f"Grid resolution must be positive, got {self.resolution}")
        if self.nodes.shape != (math.prod(self.resolution), self.window.dimension):
            raise ValueError(f"Grid nodes have unexpected shape {self.nodes.shape}")
        return self

    @property
    def size(self) -> int:
        return math.prod(self.resolution)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(side / count for side, count in zip(self.window.sides, self.resolution))

    @property
    def axes(self) -> tuple[np.ndarray, ...]:
        """Cell-centre coordinates along each axis."""
        return tuple(
            low + (np.arange(count) + 0.5) * step
            for low, count, step in zip(self.window.lower, self.resolution, self.spacing)
        )

    @property
    def signature(self) -> tuple[Window, tuple[int, ...]]:
        """Hashable key identifying the grid."""
        return self.window, self.resolution


class KernelFamily(StrEnum):
    BETA = "beta"
    GAUSSIAN = "gaussian"


class KernelSpec(BaseModel):
    model_config = {"frozen": True}

    family: KernelFamily
    gamma: float = Field(default=0.0, ge=0.0)
    dimension: int = Field(default=2, ge=1)

    @property
    def label(self) -> str:
        if self.family is KernelFamily.GAUSSIAN:
            return "gaussian"
        if self.gamma == 0.0:
            return "box"
        if self.gamma == 1.0:
            return "epanechnikov"
        return f"beta:{self.gamma:g}"


class EdgeCorrection(StrEnum):
    NONE = "none"
    GLOBAL = "global"
    LOCAL = "local"


class IntensityRaster(BaseModel):
    model_config = {"frozen": True, "arbitrary_types_allowed": True}

    grid: Grid
    values: np.ndarray
    bandwidth: float = Field(gt=0.0)
    kernel: KernelSpec
    correction: EdgeCorrection

    @field_validator("values", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> np.ndarray:
        return _frozen_array(np.asarray(value, dtype=float).ravel())

    @model_validator(mode="after")
    def _check_values(self) -> IntensityRaster:
        if self.values.shape != (self.grid.size,):
            raise ValueError(f"Raster has {self.values.size} values for {self.grid.size} nodes")
        if np.any(self.values < 0.0) or not np.all(np.isfinite(self.values)):
            raise ValueError("Raster values must be finite and non-negative")
        return self

    def as_matrix(self) -> np.ndarray:
        """Return values shaped by the grid resolution (axis order x, y, ...)."""
        return self.values.reshape(self.grid.resolution)


class ProductDensity(BaseModel):
    model_config = {"frozen": True, "arbitrary_types_allowed": True}

    intensity: IntensityFunction
    rho2: PairFunction | None = None

    @property
    def factorizes(self) -> bool:
        """True when the second-order density is the product of intensities."""
        return self.rho2 is None

    def second_order(self, first: np.ndarray, second: np.ndarray) -> np.ndarray:
        """Return the (m, k) matrix of rho2 between two point sets."""
        if self.rho2 is None:
            return np.outer(self.intensity(first), self.intensity(second))
        return self.rho2(first, second)

    def pair_correlation(self, first: np.ndarray, second: np.ndarray) -> np.ndarray:
        """Return rho2 / (lambda lambda) for two point sets."""
        denominator = np.outer(self.intensity(first), self.intensity(second))
        return np.divide(
            self.second_order(first, second),
            denominator,
            out=np.zeros_like(denominator),
            where=denominator > 0.0,
        )


class KCorrection(StrEnum):
    NONE = "none"
    TRANSLATION = "translation"


class KEstimate(BaseModel):
    model_config = {"frozen": True, "arbitrary_types_allowed": True}

    distances: np.ndarray
    weights: np.ndarray
    intensity_estimate: float = Field(gt=0.0)
    correction: KCorrection = KCorrection.TRANSLATION

    @field_validator("distances", "weights", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> np.ndarray:
        return _frozen_array(np.asarray(value, dtype=float).ravel())

    @model_validator(mode="after")
    def _check_atoms(self) -> KEstimate:
        if self.distances.shape != self.weights.shape:
            raise ValueError("K atoms need one weight per distance")
        if self.distances.size and np.any(np.diff(self.distances) < 0.0):
            raise ValueError("K atom distances must be sorted")
        if np.any(self.weights <= 0.0):
            raise ValueError("K atom weights must be positive")
        return self


class BandwidthGrid(BaseModel):
    model_config = {"frozen": True}

    values: tuple[float, ...]

    @model_validator(mode="after")
    def _check_values(self) -> BandwidthGrid:
        if not self.values:
            raise ValueError("Bandwidth grid must not be empty")
        if any(value <= 0.0 or not math.isfinite(value) for value in self.values):
            raise ValueError("Bandwidths must be finite and positive")
        if any(low >= high for low, high in pairwise(self.values)):
            raise ValueError("Bandwidths must be strictly increasing")
        return self

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


class BandwidthMethod(StrEnum):
    CAMPBELL = "campbell"
    PPL = "ppl"
    DIGGLE = "diggle"


class ArgKind(StrEnum):
    MIN = "min"
    MAX = "max"


class BandwidthSelection(BaseModel):
    model_config = {"frozen": True}

    method: BandwidthMethod
    selected_h: float
    curve: tuple[tuple[float, float], ...]
    argkind: ArgKind

    @model_validator(mode="after")
    def _check_selected(self) -> BandwidthSelection:
        if self.selected_h not in {h for h, _ in self.curve}:
            raise ValueError(f"Selected bandwidth {self.selected_h} is not on the criterion curve")
        return self

    @property
    def bandwidths(self) -> np.ndarray:
        return np.asarray([h for h, _ in self.curve], dtype=float)

    @property
    def values(self) -> np.ndarray:
        return np.asarray([value for _, value in self.curve], dtype=float)


class PoissonHomogeneous(BaseModel):
    model_config = {"frozen": True}

    kind: Literal["poisson"] = "poisson"
    intensity: float = Field(gt=0.0)


class PoissonLinear(BaseModel):
    model_config = {"frozen": True}

    kind: Literal["poisson-linear"] = "poisson-linear"
    base: float = Field(ge=0.0)
    slope: float


class PoissonModulated(BaseModel):
    model_config = {"frozen": True}

    kind: Literal["poisson-modulated"] = "poisson-modulated"
    level: float
    amplitude: float

    @model_validator(mode="after")
    def _check_positive(self) -> PoissonModulated:
        if self.level - abs(self.amplitude) < 0.0:
            raise ValueError("Modulated intensity level must dominate the amplitude")
        return self


class MaternCluster(BaseModel):
    model_config = {"frozen": True}

    kind: Literal["matern"] = "matern"
    parent_intensity: float = Field(gt=0.0)
    radius: float = Field(gt=0.0)
    mean_offspring: float = Field(gt=0.0)


TrendKind = Annotated[
    Union[PoissonHomogeneous, PoissonLinear, PoissonModulated],
    Field(discriminator="kind"),
]


class LogGaussianCox(BaseModel):
    model_config = {"frozen": True}

    kind: Literal["lgcp"] = "lgcp"
    trend: TrendKind
    variance: float = Field(gt=0.0)
    decay: float = Field(gt=0.0)


ModelKind = Annotated[
    Union[PoissonHomogeneous, PoissonLinear, PoissonModulated, MaternCluster, LogGaussianCox],
    Field(discriminator="kind"),
]


class ModelSpec(BaseModel):
    model_config = {"frozen": True}

    model: ModelKind
    window: Window


class RngStream(BaseModel):
    model_config = {"frozen": True}

    seed: int = Field(ge=0, lt=2**64)
    stream_id: int = Field(default=0, ge=0, lt=2**64)

    def generator(self, *substream: int) -> np.random.Generator:
        """Return a Philox-backed generator keyed by (seed, stream_id, *substream)."""
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *substream))
        return np.random.Generator(np.random.Philox(sequence))


class GaussianField(BaseModel):
    model_config = {"frozen": True, "arbitrary_types_allowed": True}

    grid: Grid
    values: np.ndarray
    variance: float = Field(gt=0.0)
    decay: float = Field(gt=0.0)

    @model_validator(mode="after")
    def _check_values(self) -> GaussianField:
        if self.values.shape != (self.grid.size,):
            raise ValueError("Field needs one value per grid node")
        return self


class ExperimentConfig(BaseModel):
    model_config = {"frozen": True}

    model: ModelSpec
    replicates: int = Field(default=100, ge=1)
    bandwidth_grid: BandwidthGrid
    eval_resolution: tuple[int, ...]
    selection_kernel: KernelSpec
    selection_edge: EdgeCorrection = EdgeCorrection.NONE
    methods: tuple[BandwidthMethod, ...] = (
        BandwidthMethod.CAMPBELL,
        BandwidthMethod.DIGGLE,
        BandwidthMethod.PPL,
    )
    seed: int = Field(default=0, ge=0)
    field_resolution: int = Field(default=64, ge=1)
    threads: int = Field(default=0, ge=0)
    label: str = ""

    @model_validator(mode="after")
    def _check_consistency(self) -> ExperimentConfig:
        if len(self.eval_resolution) != self.model.window.dimension:
            raise ValueError("Evaluation resolution must match the model window dimension")
        if any(count < 1 for count in self.eval_resolution):
            raise ValueError("Evaluation resolution must be positive")
        if self.selection_kernel.dimension != self.model.window.dimension:
            raise ValueError("Selection kernel dimension must match the model window")
        if not self.methods:
            raise ValueError("At least one bandwidth selection method is required")
        return self

    @property
    def final_kernel(self) -> KernelSpec:
        """Kernel used for the scored estimate (Gaussian, fixed)."""
        return KernelSpec(family=KernelFamily.GAUSSIAN, dimension=self.model.window.dimension)

    @property
    def final_edge(self) -> EdgeCorrection:
        """Edge correction used for the scored estimate (local, fixed)."""
        return EdgeCorrection.LOCAL


class ReplicateOutcome(BaseModel):
    model_config = {"frozen": True}

    replicate: int
    method: BandwidthMethod
    point_count: int
    selected_h: float | None = None
    ise: float | None = None
    failure: str | None = None


class ExperimentResult(BaseModel):
    model_config = {"frozen": True}

    label: str
    expected_count: float
    rows: tuple[ReplicateOutcome, ...]
    normalized_average_ise: Mapping[BandwidthMethod, float | None]
    failures: Mapping[BandwidthMethod, int]
