"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class UplinkError(Exception):
    """Base class for all errors raised by mimo_uplink."""


class GroupingError(UplinkError, ValueError):
    """The user and subcarrier counts do not split into an integer number of groups."""


class RegimeError(UplinkError, ValueError):
    """The antenna count is too small for the requested number of users."""


class DomainError(UplinkError, ValueError):
    """An input lies outside the domain of an operation."""


class PlanError(UplinkError, ValueError):
    """A pilot or allocation plan does not fit the data it is applied to."""


class ConfigError(UplinkError, ValueError):
    """A configuration file could not be parsed."""


class QuadratureError(UplinkError, RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, estimate: float, error_bound: float):
        super().__init__(f"{message} (estimate={estimate!r}, error bound={error_bound!r})")
        self.estimate = estimate
        self.error_bound = error_bound


class SingularityError(UplinkError, RuntimeError):
    """The channel estimate is rank deficient, so zero-forcing is undefined."""
