"""Simulation and Monte Carlo verification tools for the stochastic heat equation
with space-time white noise and a nonlinear drift."""

from .errors import (
    ConfigError,
    DomainError,
    InvariantError,
    QuadratureError,
    ResourceError,
    ShelabError,
    StepSizeError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainError",
    "InvariantError",
    "QuadratureError",
    "ResourceError",
    "ShelabError",
    "StepSizeError",
    "__version__",
]
