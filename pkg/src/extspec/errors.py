"""Exception types shared across the package."""


class ParameterDomainError(ValueError):
    """An input parameter lies outside its physical or mathematical domain."""


class SchemaError(ValueError):
    """A config, manifest, or report document fails schema validation."""


class FitError(RuntimeError):
    """Base class for fitting failures."""


class FitRejectedError(FitError):
    """Input data rejected before fitting (e.g. no discernible peak)."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class RankDeficiencyError(FitError):
    """The normal matrix is singular or numerically rank deficient."""


class ConvergenceError(FitError):
    """The iteration limit was reached before the convergence test was met."""


class InversionError(RuntimeError):
    """Base class for measurement-inversion failures."""


class InconsistentMeasurementError(InversionError):
    """The measured (V0, q0) lie outside the image of the forward model."""


class UnstableInversionError(InversionError):
    """Too many Monte Carlo draws failed to invert."""


class NoSolutionError(ValueError):
    """No solution exists (e.g. the dipole cannot reach the requested coupling)."""


class MapFormatError(ValueError):
    """A coupling-map file violates the documented grid format."""
