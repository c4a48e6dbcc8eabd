"""Exception types shared across the package."""


class ChoreosegError(Exception):
    """Base class for all package errors."""


class ShapeError(ChoreosegError):
    """Operand shapes do not agree with the operation's contract."""


class ConfigError(ChoreosegError):
    """A configuration value is out of its valid range."""


class FormatError(ChoreosegError):
    """A file or byte stream does not match the expected binary/JSON layout."""


class OnsetNotFound(ChoreosegError):
    """No audio sample exceeded the onset amplitude threshold."""


class DegenerateParameter(ChoreosegError):
    """A parameter is in a state the operation cannot handle (e.g. zero-norm direction vector)."""


class TrainingDiverged(ChoreosegError):
    """Loss became non-finite during optimization."""
