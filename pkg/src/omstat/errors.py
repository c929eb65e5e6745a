"""Exception hierarchy shared by the numerical modules."""


class OmstatError(Exception):
    """Base class; ``code`` is the short tag written to failure logs."""

    code = "error"


class DegenerateDiagonal(OmstatError):
    code = "degenerate-diagonal"


class NonConvergence(OmstatError):
    code = "non-convergence"

    def __init__(self, message, last=None, previous=None):
        super().__init__(message)
        self.last = last
        self.previous = previous


class NoStationaryPoint(OmstatError):
    code = "no-stationary-point"


class MultipleStationaryPoints(OmstatError):
    code = "multiple-stationary-points"


class TruncationInsufficient(OmstatError):
    code = "truncation-insufficient"


class SlowConvergence(OmstatError):
    code = "slow-convergence"


class BracketFailure(OmstatError):
    code = "bracket-failure"


class SeriesOverflow(OmstatError):
    code = "series-overflow"


class ConvergenceTooFew(OmstatError):
    code = "convergence-too-few"


class TailUnbounded(OmstatError):
    code = "tail-unbounded"


class LogOfNonPositive(OmstatError):
    code = "log-of-non-positive"


class RegimeViolation(UserWarning):
    """Non-fatal: an asymptotic formula was evaluated outside its regime."""
