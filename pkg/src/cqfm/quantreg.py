"""Linear quantile regression solved to an exact vertex optimum.

The check-loss problem

    min_a  sum_i rho_tau(y_i - z_i' a)

is a linear program. We solve its bounded dual with a primal-dual
(Frisch-Newton) interior point method, round the interior solution to a
basic solution (``p`` observations fitted exactly), and finish with
exact descent pivots along the edges of the piecewise-linear objective until
every edge direction is non-improving. The final point is therefore a
vertex optimum with a checkable optimality certificate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConvergenceError, RankDeficientError

__all__ = [
    "check_loss",
    "QuantileFitResult",
    "SieveFit",
    "fit_quantile",
    "fit_quantile_panel",
    "fit_least_squares_panel",
    "check_design_rank",
]

DEFAULT_TOL = 1e-8
MAX_ITER = 500
RANK_RTOL = 1e-10


def check_loss(u, tau):
    """Quantile check loss ``(tau - 1{u <= 0}) * u``, elementwise."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    u = np.asarray(u, dtype=float)
    out = (tau - (u <= 0)) * u
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class QuantileFitResult:
    """Solution of one check-loss problem.

    ``basis`` holds the indices of the observations interpolated exactly by
    ``a_hat``; ``history`` records the objective after each descent pivot
    (nonincreasing by construction).
    """

    a_hat: np.ndarray
    objective: float
    iterations: int
    kkt_residual: float
    basis: np.ndarray
    history: tuple = ()


@dataclass(frozen=True)
class SieveFit:
    """Per-period sieve regression of a panel on a common design.

    Attributes
    ----------
    A_hat : ndarray, shape (p, T)
        Coefficients, one column per period.
    Y_hat : ndarray, shape (n, T)
        Fitted panel ``Z @ A_hat``.
    tau : float or None
        Quantile level, ``None`` for least squares.
    method : str
        ``"quantile"`` or ``"least_squares"``.
    """

    A_hat: np.ndarray
    Y_hat: np.ndarray
    tau: float | None = None
    method: str = "quantile"
    objectives: np.ndarray | None = None
    kkt_residuals: np.ndarray | None = None
    iterations: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self):
        return self.Y_hat.shape[0]

    @property
    def T(self):
        return self.Y_hat.shape[1]


def check_design_rank(Z, rtol=RANK_RTOL):
    """Raise :class:`RankDeficientError` unless ``Z`` has full column rank."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2:
        raise ValueError("design must be a 2-d array")
    n, p = Z.shape
    if p > n:
        raise RankDeficientError(f"design has more columns ({p}) than rows ({n})")
    sv = np.linalg.svd(Z, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] < rtol * sv[0]:
        raise RankDeficientError(
            f"design is rank deficient (singular values {sv[-1]:.3e} / {sv[0]:.3e})"
        )


def _objective(r, tau):
    return float(np.sum(r * (tau - (r < 0))))


def _interior_point(Z, y, tau, max_iter, gap_tol):
    """Mehrotra predictor-corrector on the bounded dual.

    Dual LP: min -y'x  s.t.  Z'x = (1 - tau) Z'1,  0 <= x <= 1.
    Returns the primal coefficients (negated dual multipliers) and the
    iteration count.
    """
    n, p = Z.shape
    c = -y
    b = (1.0 - tau) * Z.sum(axis=0)
    x = np.full(n, 1.0 - tau)
    s = 1.0 - x
    lam = -np.linalg.lstsq(Z, y, rcond=None)[0]
    r = c - Z @ lam
    shift = max(np.mean(np.abs(r)), 1e-8 * (1.0 + np.max(np.abs(y))))
    z = np.maximum(r, 0.0) + shift
    w = np.maximum(-r, 0.0) + shift
    eta = 0.99995

    def step_len(v, dv):
        neg = dv < 0
        if not np.any(neg):
            return 1.0
        return min(1.0, eta * float(np.min(-v[neg] / dv[neg])))

    it = 0
    for it in range(1, max_iter + 1):
        gap = x @ z + s @ w
        if gap <= gap_tol * (1.0 + abs(c @ x)):
            break
        r_p = b - Z.T @ x
        r_d = c - Z @ lam - z + w
        d = 1.0 / (z / x + w / s)
        M = Z.T @ (d[:, None] * Z)

        # predictor
        r_xz = -x * z
        r_sw = -s * w
        q = r_d - r_xz / x + r_sw / s
        dlam = np.linalg.solve(M, r_p + Z.T @ (d * q))
        dx = d * (Z @ dlam - q)
        ds = -dx
        dz = (r_xz - z * dx) / x
        dw = (r_sw - w * ds) / s
        ap = min(step_len(x, dx), step_len(s, ds))
        ad = min(step_len(z, dz), step_len(w, dw))
        mu = gap / (2 * n)
        gap_aff = (x + ap * dx) @ (z + ad * dz) + (s + ap * ds) @ (w + ad * dw)
        sigma = (gap_aff / gap) ** 3

        # corrector
        r_xz = sigma * mu - x * z - dx * dz
        r_sw = sigma * mu - s * w - ds * dw
        q = r_d - r_xz / x + r_sw / s
        dlam = np.linalg.solve(M, r_p + Z.T @ (d * q))
        dx = d * (Z @ dlam - q)
        ds = -dx
        dz = (r_xz - z * dx) / x
        dw = (r_sw - w * ds) / s
        ap = min(step_len(x, dx), step_len(s, ds))
        ad = min(step_len(z, dz), step_len(w, dw))

        x = x + ap * dx
        s = s + ap * ds
        lam = lam + ad * dlam
        z = z + ad * dz
        w = w + ad * dw
    return -lam, it


def _initial_basis(Z, order):
    """Greedily take rows in ``order`` that are linearly independent."""
    n, p = Z.shape
    Q = np.empty((p, 0))
    chosen = []
    for i in order:
        v = Z[i]
        nv = np.linalg.norm(v)
        if nv == 0.0:
            continue
        resid = v - Q @ (Q.T @ v)
        nr = np.linalg.norm(resid)
        if nr > 1e-9 * nv:
            Q = np.column_stack([Q, resid / nr])
            chosen.append(i)
            if len(chosen) == p:
                break
    if len(chosen) < p:
        raise RankDeficientError("could not find p linearly independent observations")
    return np.array(chosen)


def _edge_derivatives(Z, r, basis, Zh_inv, tau, zero):
    """Directional derivatives of the objective along all 2p vertex edges.

    Column k of ``Zh_inv`` moves off the constraint r_k = 0 while keeping the
    other basic residuals at zero. Returns (deriv_plus, deriv_minus, C) with
    ``C = Z @ Zh_inv``.
    """
    C = Z @ Zh_inv
    nb = np.ones(len(r), dtype=bool)
    nb[basis] = False
    nz = nb & ~zero
    z0 = nb & zero
    psi = tau - (r[nz] < 0)
    g = psi @ C[nz]
    C0 = C[z0]
    pos = np.where(C0 > 0, (1 - tau) * C0, -tau * C0).sum(axis=0)
    neg = np.where(C0 > 0, tau * C0, -(1 - tau) * C0).sum(axis=0)
    return -g + (1 - tau) + pos, g + tau + neg, C


def kkt_residual(Z, y, a, tau, zero_tol=None, basis=None):
    """Worst normalized violation of the subgradient optimality condition.

    For each column j: ``|sum_{r_i != 0} z_ij (tau - 1{r_i < 0})|`` may not
    exceed ``sum_{r_i == 0} |z_ij|``; the excess is divided by
    ``sum_i |z_ij|``.
    """
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    r = y - Z @ a
    if zero_tol is None:
        zero_tol = 1e-11 * (1.0 + np.max(np.abs(y)))
    zero = np.abs(r) <= zero_tol
    if basis is not None:
        zero[basis] = True
    psi = tau - (r < 0)
    lhs = np.abs(psi[~zero] @ Z[~zero])
    rhs = np.abs(Z[zero]).sum(axis=0)
    scale = np.abs(Z).sum(axis=0)
    scale[scale == 0] = 1.0
    return float(np.max(np.maximum(lhs - rhs, 0.0) / scale))


def fit_quantile(
    Z, y, tau, tol=DEFAULT_TOL, max_iter=MAX_ITER, check_rank=True, start="interior"
):
    """Solve one linear quantile regression exactly.

    Parameters
    ----------
    Z : array_like, shape (n, p)
        Full column rank design.
    y : array_like, shape (n,)
        Outcomes.
    tau : float
        Quantile level in (0, 1).
    tol : float
        Relative optimality tolerance for the edge-derivative certificate.
    max_iter : int
        Cap on interior point plus descent iterations.
    start : {"interior", "least_squares"}
        Where the exact descent begins: the rounded interior point solution
        (fast, usually already optimal) or the vertex closest to the least
        squares fit (pure pivoting, slower).

    Returns
    -------
    QuantileFitResult

    Raises
    ------
    RankDeficientError
        If ``Z`` is numerically rank deficient.
    ConvergenceError
        If the descent phase has not certified optimality within ``max_iter``.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    Z = np.ascontiguousarray(Z, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if Z.ndim != 2 or Z.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: Z {Z.shape}, y {y.shape}")
    if not (np.all(np.isfinite(Z)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite values in quantile regression inputs")
    if check_rank:
        check_design_rank(Z)
    n, p = Z.shape

    if start not in ("interior", "least_squares"):
        raise ValueError(f"unknown start {start!r}")
    if n == p:
        a0, ipm_iter = np.linalg.solve(Z, y), 0
    elif start == "least_squares":
        a0, ipm_iter = np.linalg.lstsq(Z, y, rcond=None)[0], 0
    else:
        a0, ipm_iter = _interior_point(Z, y, tau, min(100, max_iter), 1e-9)
    zero_tol = 1e-11 * (1.0 + np.max(np.abs(y)))
    r0 = y - Z @ a0
    basis = _initial_basis(Z, np.argsort(np.abs(r0), kind="stable"))

    history = []
    it = ipm_iter
    while True:
        Zh = Z[basis]
        a = np.linalg.solve(Zh, y[basis])
        r = y - Z @ a
        r[basis] = 0.0
        history.append(_objective(r, tau))
        zero = np.abs(r) <= zero_tol
        Zh_inv = np.linalg.inv(Zh)
        dplus, dminus, C = _edge_derivatives(Z, r, basis, Zh_inv, tau, zero)
        scale = 1.0 + np.abs(C).sum(axis=0)
        rel = np.minimum(dplus, dminus) / scale
        k = int(np.argmin(rel))
        if rel[k] >= -tol:
            break
        if it >= max_iter:
            raise ConvergenceError(
                f"quantile regression did not converge in {max_iter} iterations",
                kkt_residual=kkt_residual(Z, y, a, tau, zero_tol, basis),
                iterations=it,
            )
        it += 1
        sign = 1.0 if dplus[k] <= dminus[k] else -1.0
        slope = dplus[k] if sign > 0 else dminus[k]
        c = sign * C[:, k]
        # residuals move as r_i - s c_i; nonzero ones break at s_i = r_i / c_i
        cand = ~zero & (np.abs(c) > 0)
        cand[basis] = False
        idx = np.flatnonzero(cand)
        with np.errstate(divide="ignore", invalid="ignore"):
            brk = r[idx] / c[idx]
        keep = brk > 0
        idx, brk = idx[keep], brk[keep]
        if idx.size == 0:
            raise ConvergenceError("unbounded descent direction", iterations=it)
        order = np.argsort(brk, kind="stable")
        cum = slope + np.cumsum(np.abs(c[idx[order]]))
        j = int(np.searchsorted(cum >= 0, True)) if np.any(cum >= 0) else len(order) - 1
        basis = basis.copy()
        basis[k] = idx[order[j]]

    return QuantileFitResult(
        a_hat=a,
        objective=history[-1],
        iterations=it,
        kkt_residual=kkt_residual(Z, y, a, tau, zero_tol, basis),
        basis=np.sort(basis),
        history=tuple(history),
    )


def _check_panel(Y, Z):
    Y = np.asarray(Y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.ndim != 2 or Z.ndim != 2 or Y.shape[0] != Z.shape[0]:
        raise ValueError(f"shape mismatch: Y {Y.shape}, Z {Z.shape}")
    return Y, Z


def fit_quantile_panel(Y, Z, tau, tol=DEFAULT_TOL, max_iter=MAX_ITER):
    """Run :func:`fit_quantile` independently on every column of ``Y``.

    Raises
    ------
    ConvergenceError, ValueError
        Re-raised with the failing period index in the message.
    """
    Y, Z = _check_panel(Y, Z)
    check_design_rank(Z)
    p, T = Z.shape[1], Y.shape[1]
    A = np.empty((p, T))
    obj = np.empty(T)
    kkt = np.empty(T)
    iters = np.empty(T, dtype=int)
    for t in range(T):
        try:
            res = fit_quantile(Z, Y[:, t], tau, tol=tol, max_iter=max_iter, check_rank=False)
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"period {t}: {exc}", kkt_residual=exc.kkt_residual, iterations=exc.iterations
            ) from exc
        except ValueError as exc:
            raise type(exc)(f"period {t}: {exc}") from exc
        A[:, t] = res.a_hat
        obj[t] = res.objective
        kkt[t] = res.kkt_residual
        iters[t] = res.iterations
    return SieveFit(
        A_hat=A,
        Y_hat=Z @ A,
        tau=float(tau),
        method="quantile",
        objectives=obj,
        kkt_residuals=kkt,
        iterations=iters,
    )


def fit_least_squares_panel(Y, Z):
    """Per-period least squares ``A = (Z'Z)^{-1} Z'Y`` via a QR factorization."""
    Y, Z = _check_panel(Y, Z)
    check_design_rank(Z)
    Q, R = np.linalg.qr(Z)
    A = np.linalg.solve(R, Q.T @ Y)
    return SieveFit(A_hat=A, Y_hat=Z @ A, tau=None, method="least_squares")
