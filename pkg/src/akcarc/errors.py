"""Exception types shared across the package."""


class AkcArcError(Exception):
    """Base class for all package errors."""


class ShapeError(AkcArcError):
    """Operands have incompatible shapes."""


class InvalidInput(AkcArcError):
    """Input violates a value precondition (non-finite, bad range, ...)."""


class EmptyInput(AkcArcError):
    """An operand that must be non-empty is empty."""


class StateError(AkcArcError):
    """Operation called in the wrong state (e.g. backward before forward)."""


class MissingClassError(AkcArcError):
    """A class id has no labeled example where one is required."""


class InvalidLabel(AkcArcError):
    """A label is outside the valid class range."""


class InvalidSplit(AkcArcError):
    """A requested labeled/unlabeled split is infeasible."""


class ConfigError(AkcArcError):
    """Experiment or task configuration is invalid."""


class ParseError(AkcArcError):
    """A data file could not be parsed; message carries the location."""
