"""Exception types shared across the package."""

from __future__ import annotations


class ParkrouteError(Exception):
    """Base class for all package-specific errors."""


class InstanceFormatError(ParkrouteError):
    """Malformed instance document: parse failure, dimension mismatch, negative time."""


class InfeasibleInstanceError(ParkrouteError):
    """No feasible tour exists, e.g. a single package exceeds the carrier capacity."""


class InfeasibleSolutionError(ParkrouteError):
    """A candidate solution violates coverage, capacity, or structural rules."""

    def __init__(self, violations: list[str]):
        super().__init__("infeasible solution: " + "; ".join(violations))
        self.violations = list(violations)


class ResourceLimitError(ParkrouteError):
    """The requested computation would exceed a configured size or node cap."""


class UnsupportedError(ParkrouteError):
    """Requested operation is outside the supported parameter range."""
