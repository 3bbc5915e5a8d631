"""Additive Chebyshev sieve basis over standardized characteristics."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "BasisFamily",
    "Standardizer",
    "SieveBasis",
    "standardize_columns",
    "fit_basis",
    "evaluate_basis",
    "chebyshev_features",
    "default_k_n",
]


class BasisFamily(str, Enum):
    CHEBYSHEV = "chebyshev"


@dataclass(frozen=True)
class Standardizer:
    """Column means and sample standard deviations (ddof=1)."""

    mean: np.ndarray
    sd: np.ndarray
    column_names: tuple = ()

    def transform(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.mean.shape[0]:
            raise ValueError(
                f"expected {self.mean.shape[0]} characteristics, got {X.shape[1]}"
            )
        return (X - self.mean) / self.sd

    def inverse_transform(self, Xs):
        return np.asarray(Xs, dtype=float) * self.sd + self.mean


def standardize_columns(X, column_names=None):
    """Center each column to mean 0 and scale to sample sd 1.

    Parameters
    ----------
    X : array_like, shape (n, D)
        Raw characteristics.
    column_names : sequence of str, optional
        Labels used in error messages; defaults to ``x1..xD``.

    Returns
    -------
    Xs : ndarray, shape (n, D)
    standardizer : Standardizer
        Parameters for reuse on evaluation grids.

    Raises
    ------
    ValueError
        On non-finite entries or a constant characteristic.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, D = X.shape
    if n < 1 or D < 1:
        raise ValueError("characteristics matrix must be non-empty")
    names = tuple(column_names) if column_names is not None else tuple(f"x{d + 1}" for d in range(D))
    if len(names) != D:
        raise ValueError(f"{len(names)} column names for {D} columns")
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))[0]
        raise ValueError(f"non-finite value in characteristic {names[bad[1]]!r}, row {bad[0]}")
    for d in range(D):
        if np.unique(X[:, d]).size < 2:
            raise ValueError(f"constant characteristic {names[d]!r}")
    mean = X.mean(axis=0)
    sd = X.std(axis=0, ddof=1)
    std = Standardizer(mean=mean, sd=sd, column_names=names)
    return std.transform(X), std


def default_k_n(n):
    """``max(2, round(n ** (1/3)))``."""
    return max(2, int(round(n ** (1.0 / 3.0))))


def chebyshev_features(u, k_n):
    """Chebyshev polynomials T_1..T_{k_n} at ``u`` by the three-term recurrence.

    Returns an array of shape ``u.shape + (k_n,)``.
    """
    u = np.asarray(u, dtype=float)
    out = np.empty(u.shape + (k_n,))
    t_prev = np.ones_like(u)
    t_cur = u
    out[..., 0] = t_cur
    for j in range(1, k_n):
        t_prev, t_cur = t_cur, 2.0 * u * t_cur - t_prev
        out[..., j] = t_cur
    return out


@dataclass(frozen=True)
class SieveBasis:
    """Fitted additive sieve: one global intercept plus ``k_n`` Chebyshev
    polynomials (degrees 1..k_n) of each characteristic.

    Each column is mapped affinely from its fitted [min, max] onto [-1, 1];
    values outside that range are clamped at evaluation.
    """

    k_n: int
    D: int
    lower: np.ndarray
    upper: np.ndarray
    family: BasisFamily = BasisFamily.CHEBYSHEV
    include_intercept: bool = True

    @property
    def dim(self):
        return 1 + self.D * self.k_n

    def map_to_unit(self, X):
        """Affine map to [-1, 1] followed by clamping."""
        X = np.asarray(X, dtype=float)
        u = 2.0 * (X - self.lower) / (self.upper - self.lower) - 1.0
        return np.clip(u, -1.0, 1.0)

    def transform(self, X):
        """Evaluate the basis row-wise; returns shape (n, 1 + D*k_n)."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.D:
            raise ValueError(f"expected {self.D} characteristics, got shape {X.shape}")
        feats = chebyshev_features(self.map_to_unit(X), self.k_n)
        # (n, D, k_n) -> all k_n functions of characteristic 1, then 2, ...
        return np.concatenate([np.ones((X.shape[0], 1)), feats.reshape(X.shape[0], -1)], axis=1)


def fit_basis(X, k_n, family=BasisFamily.CHEBYSHEV):
    """Record per-column ranges of ``X`` and build the sieve basis.

    Raises
    ------
    ValueError
        If ``k_n < 1``, ``X`` is empty, or a column has zero range.
    """
    if int(k_n) != k_n or k_n < 1:
        raise ValueError(f"k_n must be a positive integer, got {k_n}")
    family = BasisFamily(family)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError("characteristics matrix must be non-empty")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite characteristics")
    lower = X.min(axis=0)
    upper = X.max(axis=0)
    if np.any(upper <= lower):
        d = int(np.flatnonzero(upper <= lower)[0])
        raise ValueError(f"characteristic {d} has zero range")
    return SieveBasis(k_n=int(k_n), D=X.shape[1], lower=lower, upper=upper, family=family)


def evaluate_basis(basis, x):
    """Feature vector of length ``1 + D*k_n`` for a single point ``x``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != basis.D:
        raise ValueError(f"expected a vector of {basis.D} characteristics, got shape {x.shape}")
    return basis.transform(x[None, :])[0]
