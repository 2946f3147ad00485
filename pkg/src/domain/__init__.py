from .errors import FieldFactorizationError, InsufficientPointsError, NoAdmissibleBandwidthError
from .schemas import (
    ArgKind,
    BandwidthGrid,
    BandwidthMethod,
    BandwidthSelection,
    EdgeCorrection,
    ExperimentConfig,
    ExperimentResult,
    GaussianField,
    Grid,
    IntensityRaster,
    KCorrection,
    KEstimate,
    KernelFamily,
    KernelSpec,
    ModelSpec,
    PointPattern,
    ProductDensity,
    ReplicateOutcome,
    RngStream,
    Window,
)

__all__ = [
    "ArgKind",
    "BandwidthGrid",
    "BandwidthMethod",
    "BandwidthSelection",
    "EdgeCorrection",
    "ExperimentConfig",
    "ExperimentResult",
    "FieldFactorizationError",
    "GaussianField",
    "Grid",
    "InsufficientPointsError",
    "IntensityRaster",
    "KCorrection",
    "KEstimate",
    "KernelFamily",
    "KernelSpec",
    "ModelSpec",
    "NoAdmissibleBandwidthError",
    "PointPattern",
    "ProductDensity",
    "ReplicateOutcome",
    "RngStream",
    "Window",
]
