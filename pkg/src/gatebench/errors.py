"""Exception hierarchy shared across the toolkit.

The CLI maps each family onto an exit code: configuration problems exit with 2,
numerical failures with 3 and malformed data files with 4.
"""


class GateBenchError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(GateBenchError):
    """Scenario file could not be parsed or failed validation."""


class DataFormatError(GateBenchError):
    """A circuit/record/estimate file does not match its schema."""


class NumericalError(GateBenchError):
    """A numerical routine could not produce a trustworthy result."""


class InvalidDimensionError(NumericalError, ValueError):
    pass


class DimensionMismatchError(NumericalError, ValueError):
    pass


class NonUnitaryError(NumericalError, ValueError):
    pass


class ConstraintViolationError(NumericalError, ValueError):
    """A physicality constraint (trace preservation, positivity, ...) is violated."""

    def __init__(self, message, deviation=None):
        super().__init__(message)
        self.deviation = deviation


class UnphysicalParametersError(NumericalError, ValueError):
    pass


class InvalidDistributionError(NumericalError, ValueError):
    pass


class InsufficientDataError(NumericalError, ValueError):
    pass


class FitConvergenceError(NumericalError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class BootstrapInstabilityError(NumericalError):
    pass


class GramSingularError(NumericalError):
    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class InvalidDesignError(NumericalError, ValueError):
    pass


class InvalidModelError(NumericalError, ValueError):
    pass
