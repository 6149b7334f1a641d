"""Exception types raised across the package."""


class QDSError(Exception):
    """Base class for package-specific failures."""


class InfeasibleError(QDSError, ValueError):
    """Thresholds or budgets admit no valid operating point."""


class EstimateInvalidError(QDSError, ValueError):
    """Decoy-state statistics too weak to give a positive two-photon yield."""


class ConvergenceError(QDSError, RuntimeError):
    """A numerical solver failed to converge or lost its bracket."""
