"""Exception hierarchy shared by all modules."""


class PsarimaError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(PsarimaError, ValueError):
    pass


class InsufficientDataError(PsarimaError, ValueError):
    pass


class DegenerateSeriesError(PsarimaError, ValueError):
    pass


class NumericalDegeneracyError(PsarimaError, ArithmeticError):
    pass


class InvalidModelError(PsarimaError, ValueError):
    pass


class RankDeficiencyError(PsarimaError, ValueError):
    pass


class ConvergenceError(PsarimaError, RuntimeError):
    """Raised when an iterative solver gives up.

    The best iterate found so far is attached as ``best`` so callers can
    still inspect or use it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class FormatError(PsarimaError, ValueError):
    pass


class DataQualityError(PsarimaError, ValueError):
    def __init__(self, message, rejects=None):
        super().__init__(message)
        self.rejects = rejects or []


class ContinuityError(PsarimaError, ValueError):
    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class SegmentFitError(PsarimaError, RuntimeError):
    """A per-segment fit failed; ``partial`` holds the segments fitted so far."""

    def __init__(self, message, segment=None, partial=None):
        super().__init__(message)
        self.segment = segment
        self.partial = partial or []


class StageError(PsarimaError, RuntimeError):
    """A multi-stage run failed; ``stage`` names the step, the cause is chained."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
