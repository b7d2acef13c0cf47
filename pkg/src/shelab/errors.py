"""Exception hierarchy shared by every shelab module."""


class ShelabError(Exception):
    """Base class for all library errors."""


class DomainError(ShelabError, ValueError):
    """An argument lies outside the domain of an operation."""


class QuadratureError(ShelabError, RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ResourceError(ShelabError, MemoryError):
    """A request would exceed the configured memory budget."""


class InvariantError(ShelabError, RuntimeError):
    """A checked invariant failed; ``witness`` locates the failure."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ConfigError(ShelabError, ValueError):
    """An experiment configuration does not match its schema."""

    def __init__(self, message, location=""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


class StepSizeError(ShelabError, RuntimeError):
    """An integrator kept rejecting its step beyond the refinement limit."""
