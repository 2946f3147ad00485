from __future__ import annotations

"""Domain errors raised by the numerical core."""


class InsufficientPointsError(ValueError):
    """Raised when a pattern has too few points for the requested method."""


class NoAdmissibleBandwidthError(ValueError):
    """Raised when no candidate bandwidth yields a finite criterion value."""


class FieldFactorizationError(RuntimeError):
    """Raised when a covariance matrix cannot be factorized even after jitter."""
