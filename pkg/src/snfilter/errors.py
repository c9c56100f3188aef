"""Exception hierarchy shared by all modules."""


class SNFilterError(Exception):
    """Base class for errors raised by this package."""


class EstimatorError(SNFilterError, ValueError):
    """Invalid estimator input or violated precondition."""


class DegenerateDispersionError(EstimatorError):
    """The intensity perturbation has no spread, so the gain is undefined."""


class ScanFormatError(SNFilterError, ValueError):
    """A scan/trace file could not be parsed or failed validation."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(SNFilterError, ValueError):
    """Bad configuration value or unknown key."""

    def __init__(self, message, key=None):
        self.key = key
        if key is not None and key not in message:
            message = f"{key}: {message}"
        super().__init__(message)
