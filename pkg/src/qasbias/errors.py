"""Exception types raised across the package."""


class QASError(Exception):
    """Base class for all package errors."""


class InvalidClauseError(QASError, ValueError):
    pass


class DimensionError(QASError, ValueError):
    pass


class CapacityError(QASError, ValueError):
    pass


class GenerationError(QASError, RuntimeError):
    pass


class InstanceParseError(QASError, ValueError):
    pass


class InstanceValidationError(QASError, ValueError):
    pass


class DegenerateModelError(QASError, ValueError):
    pass


class ParameterError(QASError, ValueError):
    pass


class NumericalError(QASError, RuntimeError):
    pass


class ModeError(QASError, ValueError):
    """Operation is not defined for the records' sampling mode."""
