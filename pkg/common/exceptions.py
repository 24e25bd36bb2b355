class GaitTuneError(Exception):
    """Base class for every error raised by this package."""


class ParameterDomainError(GaitTuneError, ValueError):
    pass


class ConditioningError(GaitTuneError, ArithmeticError):
    pass


class InsufficientDataError(GaitTuneError, ValueError):
    pass


class DegenerateFitError(GaitTuneError, ValueError):
    pass


class FillError(GaitTuneError, ValueError):
    pass


class DegenerateSurfaceError(GaitTuneError, ValueError):
    pass


class UnsupportedConfigurationError(GaitTuneError, ValueError):
    pass


class ProtocolError(GaitTuneError, RuntimeError):
    """Raised when ask/tell are called out of order or with a foreign theta."""


class BudgetExhaustedError(GaitTuneError, RuntimeError):
    pass


class OptimizerStateError(GaitTuneError, RuntimeError):
    pass


class DataFormatError(GaitTuneError, ValueError):
    """A CSV, JSON or key-value document could not be parsed."""
