"""Exception types raised across the package."""


class TopowalkError(Exception):
    """Base class for all package errors."""


class DegeneratePoint(TopowalkError, ValueError):
    """The bands touch (sin E below tolerance); n(k), H(k) and V(k) are undefined."""


class NonIntegerWinding(TopowalkError, ArithmeticError):
    """A winding integral landed too far from an integer."""


class NormalizationError(TopowalkError, ValueError):
    pass


class StepOrderError(TopowalkError, ValueError):
    pass


class InvalidConfig(TopowalkError, ValueError):
    pass
