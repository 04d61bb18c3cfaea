"""Exception hierarchy.

The CLI maps these onto exit codes: validation problems exit with 2,
spectral "no result" outcomes with 3, and I/O failures with 4.
"""


class RumkitError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ValidationError(RumkitError, ValueError):
    """Input violates a precondition or a type invariant."""

    exit_code = 2

    def __init__(self, message, path=None):
        self.path = path
        if path is not None:
            message = f"{message} (at {path})"
        super().__init__(message)


class DegenerateBasisError(ValidationError):
    def __init__(self, message="degenerate basis"):
        super().__init__(message)


class WindowError(ValidationError):
    """A construction does not fit in the realized window."""


class SpectralResultError(RumkitError):
    """A well-posed query with a negative outcome (exit code 3)."""

    exit_code = 3


class NotInSpectrumError(SpectralResultError):
    def __init__(self, message="not in spectrum"):
        super().__init__(message)


class MMaxExhaustedError(SpectralResultError):
    """No localised kernel found up to m_max. This is not a proof of absence."""

    def __init__(self, message="m_max exhausted"):
        super().__init__(message)


class FullSpectrumError(SpectralResultError):
    def __init__(self, message="spectrum is all of the torus"):
        super().__init__(message)


class RumkitIOError(RumkitError, OSError):
    exit_code = 4
