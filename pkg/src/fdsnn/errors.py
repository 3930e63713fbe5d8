"""Exception types shared across the package."""


class FdsnnError(Exception):
    """Base class for all package errors."""


class ParameterError(FdsnnError, ValueError):
    """Mismatched or structurally invalid arguments (dimensions, moduli)."""


class DomainError(FdsnnError, ValueError):
    """A value lies outside its declared domain (e.g. message out of Z_p)."""


class ConfigurationError(FdsnnError, ValueError):
    """No acceptable parameter configuration exists for the request."""


class OverflowViolation(FdsnnError, ArithmeticError):
    """Strict plaintext oracle detected a value escaping the message range."""


class SerializationError(FdsnnError, ValueError):
    """Corrupt container, bad magic, or digest mismatch."""
