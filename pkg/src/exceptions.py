"""
Exception hierarchy for the spherical robot simulator.
"""
from typing import List, Optional


class SimulationError(Exception):
    """Base class for every error raised by the simulator."""


class FrameMismatchError(SimulationError):
    """Raised when two transforms are chained across incompatible frames."""

    def __init__(self, left_from: str, right_to: str):
        self.left_from = left_from
        self.right_to = right_to
        super().__init__(
            f"Cannot compose: right transform ends in frame '{right_to}' "
            f"but left transform starts in frame '{left_from}'"
        )


class IntegrationDivergenceError(SimulationError):
    """Raised when the vehicle integrator produces a non-finite quantity."""

    def __init__(self, quantity: str, t: float):
        self.quantity = quantity
        self.t = t
        super().__init__(f"Integration diverged at t={t:.3f} s: '{quantity}' is not finite")


class UnknownKindError(SimulationError, ValueError):
    """Raised for an unknown scene, trajectory or baseline kind."""

    def __init__(self, what: str, kind: str, allowed):
        super().__init__(f"Unknown {what} '{kind}'. Expected one of: {', '.join(sorted(allowed))}")


class DegenerateRegistrationError(SimulationError):
    """Raised when a scan has too few plane correspondences to register."""

    def __init__(self, count: int, minimum: int):
        self.count = count
        super().__init__(f"Only {count} plane correspondences found (need at least {minimum})")


class EmptyBufferError(SimulationError):
    """Raised when preintegration is asked to integrate no samples."""


class NonMonotonicTimestampError(SimulationError):
    """Raised when sample timestamps go backwards or repeat."""


class ResolutionMismatchError(SimulationError):
    """Raised when two voxel grids of different resolution are compared."""


class EmptyReferenceError(SimulationError):
    """Raised when completeness is computed against an empty reference."""


class EmptySeriesError(SimulationError):
    """Raised when a metric needs more samples than it was given."""


class MismatchedScenesError(SimulationError):
    """Raised when reports from different scenes or trajectories are compared."""


class ConfigError(SimulationError):
    """Raised when the experiment configuration is invalid."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("Invalid configuration:\n  " + "\n  ".join(self.errors))


class RunError(SimulationError):
    """Wraps a failure inside an experiment run with its context."""

    def __init__(self, message: str, context: Optional[dict] = None):
        self.context = context or {}
        super().__init__(message)
