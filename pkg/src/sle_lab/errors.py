"""Exception types raised by the library."""


class SleLabError(Exception):
    """Base class for all library errors."""


class ParameterError(SleLabError, ValueError):
    """An argument is outside its admissible range."""


class DomainError(SleLabError, ValueError):
    """A point lies on (or too close to) a slit or hull where a map is undefined."""


class BranchError(SleLabError, ArithmeticError):
    """An inverse map left the closed upper half-plane."""


class ZipperError(SleLabError, ArithmeticError):
    """Driving extraction met a point that is not strictly above the real line."""


class InvariantError(SleLabError, ArithmeticError):
    """A computed quantity violates a structural invariant (ordering, positivity)."""


class EvaluatorDomainError(SleLabError, ValueError):
    """M was requested outside the region where it is defined."""


class TieError(SleLabError, ValueError):
    """Two maximal exit rectangles share a coordinate."""


class DegenerateWeightsError(SleLabError, ValueError):
    """Weights are too concentrated for an asymptotic test."""


class DiscardLimitError(SleLabError, RuntimeError):
    """Too many samples were discarded for a suite result to be meaningful."""

    def __init__(self, message, discards=0, total=0):
        super().__init__(message)
        self.discards = discards
        self.total = total
