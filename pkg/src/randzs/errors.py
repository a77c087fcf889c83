"""Exception hierarchy shared by all modules.

The CLI maps these onto process exit codes: validation and configuration
problems exit with 1, numerical failures with 2, I/O problems with 3.
"""


class RandzsError(Exception):
    """Base class for library errors."""

    exit_code = 2


class ValidationError(RandzsError, ValueError):
    """Invalid user input or violated precondition."""

    exit_code = 1


class ConfigurationError(ValidationError):
    """Unsupported option combination or malformed configuration."""


class NumericalError(RandzsError, RuntimeError):
    """A numerical procedure failed or produced unusable output.

    Parameters
    ----------
    message : str
        Human readable description.
    **details
        Diagnostic metadata (matrix sizes, offending locations, ratios).
    """

    exit_code = 2

    def __init__(self, message, **details):
        self.details = details
        if details:
            extra = ", ".join(f"{k}={v!r}" for k, v in sorted(details.items()))
            message = f"{message} ({extra})"
        super().__init__(message)


class DegenerateNormError(NumericalError):
    """Bilinear eigenvector norm too small for perturbation theory."""


class RefinementError(NumericalError):
    """Step size too coarse for the requested integration."""
