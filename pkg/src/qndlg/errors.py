"""Exception types shared across the package."""


class QndLgError(Exception):
    """Base class for all package errors."""


class ParameterError(QndLgError, ValueError):
    """Invalid physical or protocol parameter."""


class SequencingError(QndLgError, RuntimeError):
    """Probe pulses used out of order or read before being fired."""


class DomainError(QndLgError, ValueError):
    """Input outside the mathematical domain of an operation (e.g. non-PSD covariance)."""
