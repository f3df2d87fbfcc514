from __future__ import annotations

from typing import Any


class IsoNystromError(Exception):
    "Base class for every error raised by the package"


class DomainError(IsoNystromError, ValueError):
    "Parametric coordinate outside the knot-vector domain"


class SingularProjectionError(IsoNystromError, ArithmeticError):
    "Homogeneous point with zero weight"


class InvalidGeometryError(IsoNystromError, ValueError):
    "Malformed patch data or a degenerate geometric mapping"


class InvalidParameterError(IsoNystromError, ValueError):
    pass


class IncompressibleMaterialError(InvalidParameterError):
    pass


class RefinementError(IsoNystromError, ValueError):
    "Knot insertion or grading that would break the partition invariants"


class PlacementError(RefinementError):
    "Refinement point not contained in any element of its level"


class SingularEvaluationError(IsoNystromError, ArithmeticError):
    "Kernel evaluated at (or numerically at) coinciding points"


class AccuracyError(IsoNystromError, ArithmeticError):
    "Requested integration tolerance not reached; carries the best estimate"

    def __init__(self, message: str, estimate: Any = None, error: float | None = None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class SolveError(IsoNystromError, ArithmeticError):
    pass


class ConfigError(IsoNystromError, ValueError):
    pass
