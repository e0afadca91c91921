"""Exception hierarchy shared by all modules.

The CLI maps these onto distinct exit codes, so raise the most specific
class available.
"""


class RobinShapeError(Exception):
    """Base class for all package errors."""


class InvalidCurveError(RobinShapeError):
    """Curve is not a valid star-shaped boundary (rho <= 0 somewhere)."""


class PerturbationTooLargeError(RobinShapeError):
    """Moved boundary is no longer star-shaped about the center."""


class DegreeTooLowError(RobinShapeError):
    """Trig-polynomial fit of a perturbed curve misses the residual target."""


class ResolutionError(RobinShapeError):
    """Mesh size h cannot resolve the curve (too few vertices or bad angles)."""


class ConvergenceError(RobinShapeError):
    """Eigensolver failed to reach its residual/eigenvalue tolerances."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class BracketError(RobinShapeError):
    """No sign change found when bracketing an eigenvalue."""


class UnstableFDError(RobinShapeError):
    """Finite-difference sequence diverges beyond the mesh-noise estimate."""


class WrongProblemError(RobinShapeError):
    """A trace from the wrong boundary-condition family was supplied."""


class NormalizationError(RobinShapeError):
    """Eigenfunction trace is not normalized to unit p-integral."""


class ConfigError(RobinShapeError):
    """Bad key, value, or range in a run configuration."""
