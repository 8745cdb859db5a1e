"""Shared exception types."""


class FewgestError(Exception):
    """Base class for all package errors."""


class ConfigError(FewgestError):
    """A configuration object violates its invariants."""


class DataError(FewgestError):
    """Input data is malformed (NaN/Inf, wrong rate, bad file)."""


class ShapeError(FewgestError):
    """A tensor does not match a declared shape."""


class UsageError(FewgestError):
    """An operation was called in an invalid order or state."""


class ProtocolError(FewgestError):
    """A service request is invalid for the current session state."""
