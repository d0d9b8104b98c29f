"""Exception types shared across the package."""


class SpinorFluxError(Exception):
    """Base class for all package errors."""


class DimensionError(SpinorFluxError, ValueError):
    """Spatial or spinor dimension out of the supported range."""


class ShapeError(SpinorFluxError, ValueError):
    """Field has the wrong per-node length or lives on the wrong grid."""


class GeometryError(SpinorFluxError, ValueError):
    """Metric not SPD, frame degenerate, or an SPD path left the cone."""


class ConfigError(SpinorFluxError, ValueError):
    """Inconsistent flow configuration (couplings, dimension rule, ...)."""


class DivergenceError(SpinorFluxError, RuntimeError):
    """NaN/Inf produced during an RHS evaluation or time step.

    Carries the flat index of the first offending node in ``node``.
    """

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class StiffnessError(SpinorFluxError, RuntimeError):
    """Adaptive stepping underflowed the minimum admissible dt."""


class SnapshotFormatError(SpinorFluxError, ValueError):
    """Malformed snapshot container; carries the failing byte offset."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset
