"""Exception hierarchy shared by all modules."""


class ExclError(Exception):
    """Base class for package errors."""


class DomainError(ExclError, ValueError):
    """An operation was applied outside its mathematical domain."""


class ConfigurationError(ExclError, ValueError):
    """Invalid parameters or experiment configuration."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class DataError(ExclError, ValueError):
    """Input data violates a documented precondition."""
