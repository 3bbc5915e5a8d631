"""Number-of-factors selection from the spectrum of the fitted panel."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quantreg import SieveFit

__all__ = [
    "FactorCountResult",
    "rank_min_estimate",
    "default_threshold",
    "eigen_ratio_estimate",
    "select_num_factors",
    "panel_spectrum",
    "default_r_bar",
    "DEFAULT_D",
    "DEFAULT_EXPONENT",
]

DEFAULT_D = 0.25
DEFAULT_EXPONENT = -0.25
FLOOR_RTOL = 1e-12


@dataclass(frozen=True)
class FactorCountResult:
    """Both factor-count estimates plus the inputs used to get them.

    ``eigenvalues`` holds the R_bar + 1 largest eigenvalues of Y'Y/(nT); the
    last one only feeds the eigen-ratio rule.
    """

    eigenvalues: np.ndarray
    p_n: float
    R_rank_min: int
    R_eigen_ratio: int
    d: float
    R_bar: int
    n: int
    T: int
    exponent: float = DEFAULT_EXPONENT


def rank_min_estimate(eigenvalues, p_n):
    """Count of eigenvalues strictly above ``p_n``."""
    ev = np.asarray(eigenvalues, dtype=float)
    return int(np.sum(ev > p_n))


def default_threshold(rho_1, n, T, d=DEFAULT_D, exponent=DEFAULT_EXPONENT):
    """``d * sqrt(rho_1) * n**exponent * ln(T)``; exponent defaults to -1/4."""
    if T < 2:
        raise ValueError(f"threshold needs T >= 2 (ln T > 0), got T={T}")
    if n < 2:
        raise ValueError(f"threshold needs n >= 2, got n={n}")
    if d <= 0:
        raise ValueError(f"d must be positive, got {d}")
    if rho_1 < 0:
        raise ValueError(f"largest eigenvalue must be nonnegative, got {rho_1}")
    return d * math.sqrt(rho_1) * n**exponent * math.log(T)


def eigen_ratio_estimate(eigenvalues, R_bar=None):
    """Index maximizing consecutive eigenvalue ratios, ties to the smallest.

    Eigenvalues below ``1e-12 * rho_1`` are floored there first.
    """
    ev = np.asarray(eigenvalues, dtype=float)
    if ev.size < 2:
        raise ValueError("eigen-ratio rule needs at least 2 eigenvalues")
    if R_bar is None:
        R_bar = ev.size - 1
    if R_bar + 1 > ev.size:
        raise ValueError(f"R_bar={R_bar} needs {R_bar + 1} eigenvalues, got {ev.size}")
    ev = ev[: R_bar + 1]
    if ev[0] <= 0:
        raise ValueError("largest eigenvalue must be positive")
    ev = np.maximum(ev, FLOOR_RTOL * ev[0])
    ratios = ev[:-1] / ev[1:]
    return int(np.argmax(ratios)) + 1


def default_r_bar(T):
    return max(1, min(8, T - 1))


def panel_spectrum(Y):
    """All eigenvalues of Y'Y/(nT), descending and clipped at 0."""
    Y = np.asarray(Y, dtype=float)
    n, T = Y.shape
    S = Y.T @ Y / (n * T)
    vals = np.linalg.eigvalsh(0.5 * (S + S.T))[::-1]
    return np.clip(vals, 0.0, None)


def select_num_factors(fit, R_bar=None, d=DEFAULT_D, exponent=DEFAULT_EXPONENT):
    """Apply the rank-minimization and eigen-ratio rules to a fitted panel.

    Parameters
    ----------
    fit : SieveFit or ndarray, shape (n, T)
    R_bar : int, optional
        Upper bound on the count; defaults to ``min(8, T - 1)``.
    d : float
        Threshold constant.
    exponent : float
        Power of ``n`` in the threshold.
    """
    Y = fit.Y_hat if isinstance(fit, SieveFit) else np.asarray(fit, dtype=float)
    n, T = Y.shape
    if T < 2:
        raise ValueError(f"factor counting needs T >= 2, got T={T}")
    if R_bar is None:
        R_bar = default_r_bar(T)
    if R_bar < 1 or R_bar + 1 > min(n, T):
        raise ValueError(f"R_bar={R_bar} must satisfy 1 <= R_bar <= min(n, T) - 1 = {min(n, T) - 1}")
    spec = panel_spectrum(Y)[: R_bar + 1]
    p_n = default_threshold(spec[0], n, T, d=d, exponent=exponent)
    r_min = rank_min_estimate(spec[:R_bar], p_n)
    r_ratio = eigen_ratio_estimate(spec, R_bar) if spec[0] > 0 else 1
    return FactorCountResult(
        eigenvalues=spec,
        p_n=p_n,
        R_rank_min=r_min,
        R_eigen_ratio=r_ratio,
        d=float(d),
        R_bar=int(R_bar),
        n=n,
        T=T,
        exponent=float(exponent),
    )
