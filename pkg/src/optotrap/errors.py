"""Exception hierarchy shared by the modules and mapped to CLI exit codes."""


class OptotrapError(Exception):
    """Base class for all package errors."""


class ValidationError(OptotrapError, ValueError):
    """A parameter violates a physical or structural invariant.

    ``field`` names the offending config key when known (e.g. ``cavity.length_m``).
    """

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class ConfigParseError(OptotrapError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalError(OptotrapError):
    """Root not found, divergence, failed fit and friends."""


class NoCrossingError(NumericalError):
    pass


class DivergenceError(NumericalError):
    pass


class NonConvergenceError(NumericalError):
    pass


class PoorFitError(NumericalError):
    pass


class NoPeakError(NumericalError):
    pass


class InsufficientLengthError(NumericalError):
    pass


class OracleFailure(OptotrapError):
    pass
