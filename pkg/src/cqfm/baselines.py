"""Comparator estimators: projected PCA with least squares, and plain PCA."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .qppca import QppcaEstimate, extract_factors, ppca_estimate

__all__ = ["BaselineMethod", "BaselineEstimate", "ppca_pipeline", "pca_pipeline"]


class BaselineMethod(str, Enum):
    PPCA = "PPCA"
    PCA = "PCA"


@dataclass(frozen=True)
class BaselineEstimate:
    """Factors and loadings from a comparator.

    For PPCA, ``projected`` carries the full estimate (basis, loading
    functions, updated factors); for PCA it is ``None`` and ``B_hat`` too.
    """

    method: BaselineMethod
    F_hat: np.ndarray
    G_or_Lambda_hat: np.ndarray
    B_hat: np.ndarray | None
    eigenvalues: np.ndarray
    spectrum: np.ndarray = field(default=None, repr=False)
    projected: QppcaEstimate | None = field(default=None, repr=False)

    def loading_function(self, X, standardized=False):
        if self.projected is None:
            raise ValueError("plain PCA has no loading functions")
        return self.projected.loading_function(X, standardized=standardized)


def ppca_pipeline(panel, k_n=None, R=1):
    """Sieve least-squares projection of each period followed by PCA."""
    est = ppca_estimate(panel, k_n=k_n, R=R)
    return BaselineEstimate(
        method=BaselineMethod.PPCA,
        F_hat=est.F_hat,
        G_or_Lambda_hat=est.G_hat,
        B_hat=est.B_hat,
        eigenvalues=est.Omega_hat,
        spectrum=est.spectrum,
        projected=est,
    )


def pca_pipeline(panel, R=1, demean=False):
    """PCA directly on the outcome panel.

    ``panel`` is a PanelData or an (n, T) array. With ``demean`` each
    period is centered across units first.
    """
    Y = np.asarray(getattr(panel, "Y", panel), dtype=float)
    if demean:
        Y = Y - Y.mean(axis=0, keepdims=True)
    ext = extract_factors(Y, R)
    return BaselineEstimate(
        method=BaselineMethod.PCA,
        F_hat=ext.F_hat,
        G_or_Lambda_hat=ext.G_hat,
        B_hat=None,
        eigenvalues=ext.Omega_hat,
        spectrum=ext.spectrum,
    )
