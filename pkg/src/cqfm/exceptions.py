"""Exception types raised across the package."""


class CqfmError(Exception):
    """Base class for all package errors."""


class RankDeficientError(CqfmError, ValueError):
    """Design matrix (or Gram matrix) is numerically rank deficient."""


class ConvergenceError(CqfmError, RuntimeError):
    """Iterative solver stopped before certifying optimality.

    Attributes
    ----------
    kkt_residual : float
        Last measured optimality slack.
    iterations : int
        Iterations spent before giving up.
    """

    def __init__(self, message, kkt_residual=float("nan"), iterations=0):
        super().__init__(message)
        self.kkt_residual = kkt_residual
        self.iterations = iterations


class StageError(CqfmError):
    """Failure inside one stage of a multi-stage pipeline.

    ``stage`` names the step (``"standardize"``, ``"quantile_fit"``, ...) and
    ``tau``/``period`` locate it when relevant.
    """

    def __init__(self, stage, message, tau=None, period=None):
        where = [f"stage={stage}"]
        if tau is not None:
            where.append(f"tau={tau:g}")
        if period is not None:
            where.append(f"t={period}")
        super().__init__(f"[{', '.join(where)}] {message}")
        self.stage = stage
        self.tau = tau
        self.period = period
        self.detail = message
