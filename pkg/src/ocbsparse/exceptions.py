"""Exception hierarchy shared by every module."""


class OCBError(Exception):
    """Base class for all errors raised by ocbsparse."""


class ParameterError(OCBError, ValueError):
    """A parameter is outside its admissible domain."""


class InputError(ParameterError):
    """Empty or otherwise unusable input data."""


class ShapeError(OCBError, ValueError):
    """Array dimensions do not agree."""


class BudgetError(OCBError):
    """An exhaustive enumeration would exceed the configured budget."""


class RangeError(OCBError, ValueError):
    """A requested target cannot be reached inside the searched range."""


class FitError(OCBError):
    """A regression design matrix is rank deficient."""


class PlateauError(OCBError, ValueError):
    """The requested distortion lies below an asymptotic plateau."""


class OverlapError(OCBError):
    """Neighbouring energy histograms do not overlap."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class BranchError(OCBError):
    """A continuation sweep jumped between solution branches."""


class ConvergenceError(OCBError):
    """An iterative solver stopped before meeting its tolerance.

    Attributes
    ----------
    best : object
        Best iterate found before giving up (solver specific).
    trace : list
        Residual history, most recent last.
    """

    def __init__(self, message, best=None, trace=None):
        super().__init__(message)
        self.best = best
        self.trace = list(trace) if trace is not None else []


class DivergenceError(ConvergenceError):
    """An iteration blew up; a smaller damping factor usually helps."""
