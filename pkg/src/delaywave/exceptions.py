"""Exception hierarchy shared by all delaywave modules."""


class DelayWaveError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(DelayWaveError, ValueError):
    """A physical constant is out of its admissible range."""


class GeometryError(ParameterError):
    """Interface abscissae violate ``0 < alpha < beta < gamma < L``."""


class HypothesisError(ParameterError):
    """Damping coefficients violate ``0 < |kappa2| < kappa1``."""


class DomainError(DelayWaveError, ValueError):
    """An abscissa lies outside ``[0, L]``."""


class ResolutionError(DelayWaveError, ValueError):
    """A discretization parameter is too coarse."""


class ShapeError(DelayWaveError, ValueError):
    """Array dimensions do not match the discrete state layout."""


class SolverError(DelayWaveError, RuntimeError):
    """A linear solve or factorization failed."""


class ConvergenceError(DelayWaveError, RuntimeError):
    """An iterative eigen/singular value solver did not converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class AlignmentError(DelayWaveError, ValueError):
    """The delay is not an integer multiple of the time step."""


class TraceError(DelayWaveError, ValueError):
    """An energy trace is malformed (e.g. non-monotone time column)."""


class FitError(DelayWaveError, ValueError):
    """Not enough (or invalid) data for a least-squares fit."""


class ConfigError(DelayWaveError, ValueError):
    """A configuration file could not be parsed."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno
