"""Quantile-projected principal components.

Stage 1 fits a sieve quantile regression per period, stage 2 extracts
factors by PCA of the fitted panel, stage 3 maps the loadings back onto the
sieve coefficients so the loading functions can be evaluated anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import SieveBasis, Standardizer, default_k_n, fit_basis, standardize_columns
from .exceptions import CqfmError, StageError
from .quantreg import (
    DEFAULT_TOL,
    SieveFit,
    fit_least_squares_panel,
    fit_quantile_panel,
)

__all__ = [
    "FactorExtraction",
    "QppcaEstimate",
    "extract_factors",
    "recover_loading_coefficients",
    "evaluate_loading_function",
    "update_factors",
    "qppca_pipeline",
    "projected_pipeline",
    "prepare_design",
    "estimate_from_fit",
    "apply_sign_convention",
]

GAP_RTOL = 1e-10
RANK_RTOL = 1e-12


def _fitted(fit):
    return fit.Y_hat if isinstance(fit, SieveFit) else np.asarray(fit, dtype=float)


def apply_sign_convention(F):
    """Flip columns so each one's largest-magnitude entry is positive.

    Ties go to the lowest row index. Returns the flipped copy and the signs.
    """
    F = np.array(F, dtype=float, copy=True)
    idx = np.argmax(np.abs(F), axis=0)
    signs = np.where(F[idx, np.arange(F.shape[1])] < 0, -1.0, 1.0)
    return F * signs, signs


@dataclass(frozen=True)
class FactorExtraction:
    """Principal factors of a fitted panel.

    ``spectrum`` holds all T eigenvalues of Y'Y/(nT) in descending order;
    ``Omega_hat`` is its first R entries.
    """

    F_hat: np.ndarray
    G_hat: np.ndarray
    Omega_hat: np.ndarray
    spectrum: np.ndarray
    warnings: tuple = ()


def extract_factors(fit, R):
    """PCA of the fitted panel.

    Parameters
    ----------
    fit : SieveFit or ndarray, shape (n, T)
        Fitted panel.
    R : int
        Number of factors, ``1 <= R <= T``.

    Returns
    -------
    FactorExtraction
        ``F_hat`` holds sqrt(T) times the leading eigenvectors of Y'Y,
        ``G_hat = Y F_hat / T``. A warning is attached when ``R`` exceeds
        the numerical rank or the R-th eigenvalue gap is degenerate.
    """
    Y = _fitted(fit)
    n, T = Y.shape
    if int(R) != R or R < 1:
        raise ValueError(f"R must be a positive integer, got {R}")
    if R > T:
        raise ValueError(f"R={R} exceeds the number of periods T={T}")
    S = Y.T @ Y / (n * T)
    S = 0.5 * (S + S.T)
    vals, vecs = np.linalg.eigh(S)
    vals = np.clip(vals[::-1], 0.0, None)
    vecs = vecs[:, ::-1]
    warnings = []
    top = vals[0]
    rank = int(np.sum(vals > RANK_RTOL * top)) if top > 0 else 0
    if R > rank:
        warnings.append(f"R={R} exceeds numerical rank {rank} of the fitted panel")
    if R < T and vals[R - 1] > 0 and (vals[R - 1] - vals[R]) / vals[R - 1] < GAP_RTOL:
        warnings.append(f"eigenvalues {R} and {R + 1} are numerically tied")
    F_hat, _ = apply_sign_convention(np.sqrt(T) * vecs[:, :R])
    G_hat = Y @ F_hat / T
    return FactorExtraction(
        F_hat=F_hat, G_hat=G_hat, Omega_hat=vals[:R].copy(), spectrum=vals, warnings=tuple(warnings)
    )


def recover_loading_coefficients(fit, F_hat):
    """Loading-function coefficients ``B_hat = A_hat F_hat / T``."""
    A = fit.A_hat if isinstance(fit, SieveFit) else np.asarray(fit, dtype=float)
    F_hat = np.asarray(F_hat, dtype=float)
    if F_hat.ndim != 2 or A.shape[1] != F_hat.shape[0]:
        raise ValueError(f"shape mismatch: A_hat {A.shape}, F_hat {F_hat.shape}")
    return A @ F_hat / F_hat.shape[0]


def evaluate_loading_function(basis, B_hat, x):
    """Loading functions at ``x``: ``phi(x)' B_hat``.

    ``x`` is a single point (length D, returns an R-vector) or an (m, D)
    array of points (returns m x R). Points are on the scale the basis was
    fitted on.
    """
    B_hat = np.asarray(B_hat, dtype=float)
    if B_hat.ndim != 2 or B_hat.shape[0] != basis.dim:
        raise ValueError(f"B_hat has shape {B_hat.shape}, expected ({basis.dim}, R)")
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.shape[0] != basis.D:
            raise ValueError(f"expected {basis.D} characteristics, got {x.shape[0]}")
        return basis.transform(x[None, :])[0] @ B_hat
    return basis.transform(x) @ B_hat


def update_factors(fit, G_hat):
    """Cross-sectional regression of each fitted period on ``G_hat``.

    Returns ``F_tilde = Y' G (G'G)^{-1}`` of shape (T, R).
    """
    Y = _fitted(fit)
    G_hat = np.asarray(G_hat, dtype=float)
    if G_hat.ndim == 1:
        G_hat = G_hat[:, None]
    if G_hat.shape[0] != Y.shape[0]:
        raise ValueError(f"shape mismatch: Y {Y.shape}, G_hat {G_hat.shape}")
    GtG = G_hat.T @ G_hat
    ev = np.linalg.eigvalsh(GtG)
    if ev[-1] <= 0 or ev[0] <= 1e-12 * ev[-1]:
        raise np.linalg.LinAlgError("G_hat'G_hat is singular")
    return np.linalg.solve(GtG, G_hat.T @ Y).T


@dataclass(frozen=True)
class QppcaEstimate:
    """Output of a projected PCA run (quantile or least-squares first step).

    Attributes
    ----------
    R : int
    F_hat : ndarray (T, R)
        Factors with F'F/T = I.
    G_hat : ndarray (n, R)
        Projected loadings; G'G/n is diagonal.
    B_hat : ndarray (p, R)
        Loading-function coefficients on the sieve basis.
    Omega_hat : ndarray (R,)
        Leading eigenvalues of Y_hat'Y_hat/(nT).
    F_tilde : ndarray (T, R)
        Updated factors from regressing each fitted period on G_hat.
    tau : float or None
        Quantile level; ``None`` for the least-squares variant.
    basis, standardizer
        Transforms needed to evaluate loading functions at raw characteristics.
    fit : SieveFit
        First-stage fit; ``fit.Y_hat`` are the quantile returns.
    """

    R: int
    F_hat: np.ndarray
    G_hat: np.ndarray
    B_hat: np.ndarray
    Omega_hat: np.ndarray
    F_tilde: np.ndarray
    tau: float | None
    basis: SieveBasis
    standardizer: Standardizer
    fit: SieveFit = field(repr=False)
    spectrum: np.ndarray = field(default=None, repr=False)
    method: str = "QPPCA"
    warnings: tuple = ()

    @property
    def quantile_returns(self):
        return self.fit.Y_hat

    def loading_function(self, X, standardized=False):
        """Evaluate the estimated loading functions at characteristics ``X``.

        ``X`` is raw unless ``standardized`` is true.
        """
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        Xs = np.atleast_2d(X) if standardized else self.standardizer.transform(X)
        out = evaluate_loading_function(self.basis, self.B_hat, Xs)
        return out[0] if single else out


def prepare_design(panel, k_n=None):
    """Standardize characteristics and build the sieve design.

    Returns ``(Z, basis, standardizer)``.
    """
    Xs, standardizer = standardize_columns(panel.X, getattr(panel, "characteristic_names", None))
    k = default_k_n(panel.Y.shape[0]) if k_n is None else k_n
    basis = fit_basis(Xs, k)
    return basis.transform(Xs), basis, standardizer


def estimate_from_fit(fit, R, basis, standardizer, tau=None, method="QPPCA"):
    """Steps 2 and 3 given a first-stage fit."""
    ext = extract_factors(fit, R)
    B_hat = recover_loading_coefficients(fit, ext.F_hat)
    F_tilde = update_factors(fit, ext.G_hat)
    return QppcaEstimate(
        R=int(R),
        F_hat=ext.F_hat,
        G_hat=ext.G_hat,
        B_hat=B_hat,
        Omega_hat=ext.Omega_hat,
        F_tilde=F_tilde,
        tau=tau,
        basis=basis,
        standardizer=standardizer,
        fit=fit,
        spectrum=ext.spectrum,
        method=method,
        warnings=ext.warnings,
    )


def _stage(name, tau, fn, *args):
    try:
        return fn(*args)
    except StageError:
        raise
    except (CqfmError, ValueError, np.linalg.LinAlgError) as exc:
        raise StageError(name, str(exc), tau=tau) from exc


def projected_pipeline(panel, first_step, R, k_n=None, tau=None, method="QPPCA"):
    """Shared body of the quantile and least-squares projected estimators.

    ``first_step(Y, Z)`` must return a :class:`SieveFit`.
    """
    Z, basis, standardizer = _stage("prepare_design", tau, prepare_design, panel, k_n)
    fit = _stage("first_step", tau, first_step, panel.Y, Z)
    return _stage("factors", tau, estimate_from_fit, fit, R, basis, standardizer, tau, method)


def qppca_pipeline(panel, tau, k_n=None, R=1, tol=DEFAULT_TOL):
    """Run all three stages at quantile ``tau``.

    Parameters
    ----------
    panel : PanelData
        Outcomes and raw characteristics.
    tau : float
        Quantile level.
    k_n : int, optional
        Basis functions per characteristic; ``max(2, round(n**(1/3)))`` if omitted.
    R : int
        Number of factors.
    tol : float
        Quantile solver tolerance.

    Raises
    ------
    StageError
        Identifying the failing stage.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    return projected_pipeline(
        panel,
        lambda Y, Z: fit_quantile_panel(Y, Z, tau, tol=tol),
        R,
        k_n=k_n,
        tau=float(tau),
        method="QPPCA",
    )


def ppca_estimate(panel, k_n=None, R=1):
    """Least-squares first step; see :func:`cqfm.baselines.ppca_pipeline`."""
    return projected_pipeline(panel, fit_least_squares_panel, R, k_n=k_n, tau=None, method="PPCA")
