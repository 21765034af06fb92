"""Exception types shared across the package."""


class PtspecError(Exception):
    """Base class for all package errors."""


class DomainError(PtspecError):
    """Parameters outside the method's domain of validity (m <= 1 or m = 2, etc.)."""


class RangeError(PtspecError):
    """A log-domain value cannot be converted to a native float."""


class SeedError(PtspecError):
    """Asymptotic seed requested at a point where the expansion is unreliable."""


class StepFailure(PtspecError):
    """Adaptive integrator hit the minimum step size before reaching the path end."""

    def __init__(self, msg, ray_angle=None):
        super().__init__(msg)
        self.ray_angle = ray_angle


class PoleEncountered(PtspecError):
    """Logarithmic derivative blew past the pole guard (path passed near a zero)."""

    def __init__(self, msg, ray_angle=None):
        super().__init__(msg)
        self.ray_angle = ray_angle


class InversionFailure(PtspecError):
    """Newton inversion of a monotone map stalled."""


class NotContractive(PtspecError):
    """Fixed-point iteration precondition violated (mu too small)."""


class CalibrationAmbiguous(PtspecError):
    """Neither eigenvalue-map convention matches the oracle spectrum."""


class BoundaryZeroSuspected(PtspecError):
    """Argument-principle boundary refinement failed to stabilize."""


class SubdivisionBudgetExceeded(PtspecError):
    """Quadtree zero search ran out of cells."""


class InsufficientZeros(PtspecError):
    """Fewer zeros located than the caller required."""


class UnresolvedTransition(PtspecError):
    """Eigenvalue count changed by something other than one real pair merging."""
