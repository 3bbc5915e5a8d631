"""Monte Carlo data generation, replication runner and recovery metrics."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
from scipy import stats

from .baselines import pca_pipeline, ppca_pipeline
from .factor_count import DEFAULT_D, select_num_factors
from .data import PanelData
from .qppca import evaluate_loading_function, qppca_pipeline

__all__ = [
    "ErrorDist",
    "FactorProcess",
    "DgpSpec",
    "SimulatedPanel",
    "MetricsReport",
    "GridError",
    "LOADING_FUNCTIONS",
    "simulate_panel",
    "trace_r2",
    "rotation_align",
    "alignment_error",
    "procrustes_align",
    "loading_grid_rmse",
    "default_grid",
    "run_monte_carlo",
    "METHODS",
]

METHODS = ("QPPCA", "PPCA", "PCA")
AR1_COEF = 0.7


class ErrorDist(str, Enum):
    NORMAL = "normal"
    STUDENT_T3 = "t3"
    CAUCHY = "cauchy"

    def quantile(self, tau):
        # all three laws are symmetric; scipy's t ppf is off by ~1e-17 at 0.5
        if tau == 0.5:
            return 0.0
        if self is ErrorDist.NORMAL:
            return float(stats.norm.ppf(tau))
        if self is ErrorDist.STUDENT_T3:
            return float(stats.t.ppf(tau, 3))
        return math.tan(math.pi * (tau - 0.5))

    def draw(self, rng, size):
        if self is ErrorDist.NORMAL:
            return rng.standard_normal(size)
        if self is ErrorDist.STUDENT_T3:
            return rng.standard_t(3, size)
        return rng.standard_cauchy(size)


class FactorProcess(str, Enum):
    IID_NORMAL = "iid_normal"
    AR1 = "ar1"


# Loading functions of x in [-1, 1]^D, scaled to unit variance under U(-1, 1).
# Each entry: (function, index of the characteristic it uses).
_SQ = math.sqrt(45.0) / 2.0
LOADING_FUNCTIONS = {
    "linear_x1": (lambda X: math.sqrt(3.0) * X[:, 0], 0),
    "linear_x2": (lambda X: math.sqrt(3.0) * X[:, 1], 1),
    "centered_square_x1": (lambda X: _SQ * (X[:, 0] ** 2 - 1.0 / 3.0), 0),
    "centered_square_x2": (lambda X: _SQ * (X[:, 1] ** 2 - 1.0 / 3.0), 1),
    "sin_x1": (lambda X: np.sin(0.5 * np.pi * X[:, 0]), 0),
    "exp_x2": (lambda X: np.exp(X[:, 1]) - np.sinh(1.0), 1),
}


def scale_function(X):
    """Variance-shifting loading ``0.5 + 0.25 * x1**2``."""
    return 0.5 + 0.25 * X[:, 0] ** 2


def _default_loadings(R_loc, D):
    if D >= 2:
        pool = ["linear_x1", "centered_square_x2", "linear_x2", "centered_square_x1"]
    else:
        pool = ["linear_x1", "centered_square_x1", "sin_x1"]
    if R_loc > len(pool):
        raise ValueError(f"no default loading functions for R_loc={R_loc} with D={D}")
    return tuple(pool[:R_loc])


@dataclass(frozen=True)
class DgpSpec:
    """Location factors plus an optional variance-shifting factor.

    y_it = sum_r g_r(x_i) f_tr + s(x_i) h_t u_it, with x_i ~ U(-1, 1)^D.
    Without the scale factor s(x) h_t = 1. ``noise_scale`` multiplies u.
    """

    n: int
    T: int
    D: int = 2
    R_loc: int = 2
    include_scale_factor: bool = False
    loading_functions: tuple = ()
    error_dist: ErrorDist = ErrorDist.NORMAL
    factor_process: FactorProcess = FactorProcess.IID_NORMAL
    seed: int = 0
    noise_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "error_dist", ErrorDist(self.error_dist))
        object.__setattr__(self, "factor_process", FactorProcess(self.factor_process))
        lf = tuple(self.loading_functions) or _default_loadings(self.R_loc, self.D)
        object.__setattr__(self, "loading_functions", lf)
        if self.n < 1 or self.D < 1 or self.R_loc < 1:
            raise ValueError("n, D and R_loc must be positive")
        if len(lf) != self.R_loc:
            raise ValueError(f"{len(lf)} loading functions for R_loc={self.R_loc}")
        for name in lf:
            if name not in LOADING_FUNCTIONS:
                raise ValueError(f"unknown loading function {name!r}")
            if LOADING_FUNCTIONS[name][1] >= self.D:
                raise ValueError(f"loading function {name!r} needs more than D={self.D} characteristics")
        if self.T < max(1, self.R_total):
            raise ValueError(f"T={self.T} is smaller than the number of factors {self.R_total}")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be nonnegative")

    @property
    def R_total(self):
        return self.R_loc + int(self.include_scale_factor)

    def to_dict(self):
        out = asdict(self)
        out["error_dist"] = self.error_dist.value
        out["factor_process"] = self.factor_process.value
        out["loading_functions"] = list(self.loading_functions)
        return out


@dataclass(frozen=True)
class SimulatedPanel:
    """A draw from :class:`DgpSpec` with its true components.

    ``F_true``/``G_true`` stack the location factors/loadings and, when the
    scale factor is on, ``h_t`` and ``s(x_i)`` as the last column.
    """

    panel: PanelData
    F_true: np.ndarray
    G_true: np.ndarray
    spec: DgpSpec
    h: np.ndarray = field(repr=False)

    def true_loading_functions(self, tau):
        """Callables g_r(X) spanning the conditional tau-quantile structure."""
        q = self.spec.noise_scale * self.spec.error_dist.quantile(tau)
        funcs = [LOADING_FUNCTIONS[name][0] for name in self.spec.loading_functions]
        if q != 0.0:
            if self.spec.include_scale_factor:
                funcs.append(scale_function)
            else:
                funcs.append(lambda X: np.ones(X.shape[0]))
        return funcs

    def true_structure(self, tau):
        """(G_tau, F_tau) with Q_tau(y | x) = G_tau F_tau'.

        A nonzero error quantile adds one factor: ``s(x) * h_t * q`` with the
        scale factor, or the constant ``q`` without it.
        """
        q = self.spec.noise_scale * self.spec.error_dist.quantile(tau)
        R = self.spec.R_loc
        G = self.G_true[:, :R]
        F = self.F_true[:, :R]
        if q != 0.0:
            if self.spec.include_scale_factor:
                G = np.column_stack([G, self.G_true[:, R]])
                F = np.column_stack([F, q * self.h])
            else:
                G = np.column_stack([G, np.ones(self.panel.n)])
                F = np.column_stack([F, np.full(self.panel.T, q)])
        return G, F

    def R_at(self, tau):
        return self.true_structure(tau)[0].shape[1]

    def theta_true(self, tau):
        """True conditional tau-quantile of y_it, shape (n, T)."""
        G, F = self.true_structure(tau)
        return G @ F.T


def _factors(rng, T, R, process):
    e = rng.standard_normal((T, R))
    if process is FactorProcess.IID_NORMAL:
        return e
    F = np.empty((T, R))
    F[0] = e[0]
    innov = math.sqrt(1.0 - AR1_COEF**2)
    for t in range(1, T):
        F[t] = AR1_COEF * F[t - 1] + innov * e[t]
    return F


def simulate_panel(spec, rng=None):
    """Draw one panel. Deterministic given ``spec.seed`` (or ``rng``)."""
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    n, T, D = spec.n, spec.T, spec.D
    X = rng.uniform(-1.0, 1.0, size=(n, D))
    F = _factors(rng, T, spec.R_loc, spec.factor_process)
    h = rng.uniform(0.5, 1.5, size=T)
    U = spec.error_dist.draw(rng, (n, T))
    G = np.column_stack([LOADING_FUNCTIONS[name][0](X) for name in spec.loading_functions])
    Y = G @ F.T
    if spec.include_scale_factor:
        s = scale_function(X)
        Y = Y + spec.noise_scale * (s[:, None] * h[None, :]) * U
        G_true = np.column_stack([G, s])
        F_true = np.column_stack([F, h])
    else:
        Y = Y + spec.noise_scale * U
        G_true, F_true = G, F
    panel = PanelData(Y=Y, X=X)
    return SimulatedPanel(panel=panel, F_true=F_true, G_true=G_true, spec=spec, h=h)


def trace_r2(F_true, F_hat):
    """Share of tr(F'F) captured by projecting F onto span(F_hat)."""
    F_true = np.asarray(F_true, dtype=float)
    F_hat = np.asarray(F_hat, dtype=float)
    if F_true.ndim == 1:
        F_true = F_true[:, None]
    if F_hat.ndim == 1:
        F_hat = F_hat[:, None]
    if F_hat.shape[0] != F_true.shape[0]:
        raise ValueError(f"row mismatch: {F_true.shape} vs {F_hat.shape}")
    sv = np.linalg.svd(F_hat, compute_uv=False)
    if sv[0] == 0 or sv[-1] < 1e-12 * sv[0] or F_hat.shape[1] > F_hat.shape[0]:
        raise np.linalg.LinAlgError("F_hat is rank deficient")
    Q, _ = np.linalg.qr(F_hat)
    proj = Q.T @ F_true
    denom = np.sum(F_true**2)
    return float(np.clip(np.sum(proj**2) / denom, 0.0, 1.0))


def rotation_align(G_true, F_true, F_hat, Omega_hat):
    """``H = (G'G/n)(F'F_hat/T) Omega^{-1}`` aligning F_hat with F_true H."""
    G_true = np.atleast_2d(np.asarray(G_true, dtype=float).T).T
    F_true = np.atleast_2d(np.asarray(F_true, dtype=float).T).T
    F_hat = np.asarray(F_hat, dtype=float)
    Omega = np.asarray(Omega_hat, dtype=float).ravel()
    if np.any(Omega <= 0) or np.any(~np.isfinite(Omega)):
        raise np.linalg.LinAlgError("Omega_hat is singular")
    n, T = G_true.shape[0], F_true.shape[0]
    Sigma_g = G_true.T @ G_true / n
    return Sigma_g @ (F_true.T @ F_hat / T) / Omega[None, :]


def alignment_error(F_true, F_hat, H_hat):
    """``||F_hat - F_true H|| / sqrt(T)`` (Frobenius)."""
    F_true = np.atleast_2d(np.asarray(F_true, dtype=float).T).T
    return float(np.linalg.norm(F_hat - F_true @ H_hat) / math.sqrt(F_true.shape[0]))


def procrustes_align(F_true, F_hat):
    """Orthogonal-Procrustes rotation mapping F_hat onto F_true (diagnostic only)."""
    u, _, vt = np.linalg.svd(F_hat.T @ F_true)
    return u @ vt


def default_grid(D, m=21, lo=-0.95, hi=0.95, max_points=10000):
    """Evaluation points in raw units: a tensor grid, or axis lines if too big."""
    axis = np.linspace(lo, hi, m)
    if m**D <= max_points:
        mesh = np.meshgrid(*([axis] * D), indexing="ij")
        return np.column_stack([g.ravel() for g in mesh])
    pts = np.zeros((D * m, D))
    for d in range(D):
        pts[d * m : (d + 1) * m, d] = axis
    return pts


@dataclass(frozen=True)
class GridError:
    rmse: np.ndarray
    sup: np.ndarray


def loading_grid_rmse(basis, B_hat, H_hat, g_true, grid, standardizer=None):
    """Per-factor RMSE and sup-norm of ``g_hat(x) - H^{-1} g(x)`` over ``grid``.

    ``grid`` is in raw characteristic units; ``standardizer`` maps it to the
    scale the basis was fitted on. ``g_true`` is a list of callables
    taking an (m, D) array.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    Xs = standardizer.transform(grid) if standardizer is not None else grid
    g_hat = evaluate_loading_function(basis, B_hat, Xs)
    G = np.column_stack([g(grid) for g in g_true])
    target = np.linalg.solve(H_hat, G.T).T
    diff = g_hat - target
    return GridError(rmse=np.sqrt(np.mean(diff**2, axis=0)), sup=np.max(np.abs(diff), axis=0))


@dataclass
class MetricsReport:
    """Per-replication records plus aggregates keyed by ``"METHOD@tau"``."""

    records: list
    aggregates: dict
    config: dict
    n_failed_reps: int = 0

    def _stat(self, metric, method, tau, stat):
        return self.aggregates[f"{method}@{tau:g}"][metric][stat]

    def trace_r2_F(self, method="QPPCA", tau=0.5, stat="median"):
        return self._stat("trace_r2", method, tau, stat)

    def loading_grid_rmse(self, method="QPPCA", tau=0.5, stat="median"):
        return self._stat("loading_rmse", method, tau, stat)

    def R_hat_accuracy(self, method="QPPCA", tau=0.5, rule="rank_min"):
        return self.aggregates[f"{method}@{tau:g}"][f"accuracy_{rule}"]

    def column(self, metric, method="QPPCA", tau=0.5):
        return np.array(
            [r[metric] for r in self.records if r["method"] == method and r["tau"] == tau and not r["error"]],
            dtype=float,
        )

    def to_json(self):
        return json.dumps(
            {"config": self.config, "aggregates": self.aggregates, "n_failed_reps": self.n_failed_reps},
            indent=2,
            sort_keys=True,
        )


class MonteCarloError(RuntimeError):
    pass


def _replication_rng(seed, rep):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(rep,)))


def _empty_record(rep, method, tau):
    nan = float("nan")
    return {
        "rep": rep,
        "method": method,
        "tau": tau,
        "R_true": -1,
        "R_used": -1,
        "trace_r2": nan,
        "align_err": nan,
        "loading_rmse": nan,
        "loading_sup": nan,
        "R_rank_min": -1,
        "R_eigen_ratio": -1,
        "error": "",
    }


def _run_replication(args):
    spec, methods, taus, rep, R, k_n, R_bar, d, grid, count_factors, demean = args
    sim = simulate_panel(spec, rng=_replication_rng(spec.seed, rep))
    panel = sim.panel
    records = []
    cache = {}
    for tau in taus:
        G_tau, F_tau = sim.true_structure(tau)
        R_true = G_tau.shape[1]
        R_used = R_true if R is None else R
        g_funcs = sim.true_loading_functions(tau)
        for method in methods:
            rec = _empty_record(rep, method, tau)
            rec["R_true"], rec["R_used"] = R_true, R_used
            try:
                if method == "QPPCA":
                    est = qppca_pipeline(panel, tau, k_n=k_n, R=R_used)
                    fit, F_hat, Omega = est.fit, est.F_hat, est.Omega_hat
                elif method == "PPCA":
                    if ("PPCA", R_used) not in cache:
                        cache[("PPCA", R_used)] = ppca_pipeline(panel, k_n=k_n, R=R_used).projected
                    est = cache[("PPCA", R_used)]
                    fit, F_hat, Omega = est.fit, est.F_hat, est.Omega_hat
                elif method == "PCA":
                    if ("PCA", R_used) not in cache:
                        cache[("PCA", R_used)] = pca_pipeline(panel, R=R_used, demean=demean)
                    est = cache[("PCA", R_used)]
                    fit, F_hat, Omega = panel.Y, est.F_hat, est.eigenvalues
                else:
                    raise ValueError(f"unknown method {method!r}")
                rec["trace_r2"] = trace_r2(F_tau, F_hat)
                if R_used == R_true:
                    H = rotation_align(G_tau, F_tau, F_hat, Omega)
                    rec["align_err"] = alignment_error(F_tau, F_hat, H)
                    if method != "PCA":
                        ge = loading_grid_rmse(est.basis, est.B_hat, H, g_funcs, grid, est.standardizer)
                        rec["loading_rmse"] = float(np.mean(ge.rmse))
                        rec["loading_sup"] = float(np.max(ge.sup))
                if count_factors and method != "PCA":
                    fc = select_num_factors(fit, R_bar=R_bar, d=d)
                    rec["R_rank_min"] = fc.R_rank_min
                    rec["R_eigen_ratio"] = fc.R_eigen_ratio
            except Exception as exc:  # recorded, judged in aggregate
                rec["error"] = f"{type(exc).__name__}: {exc}"
            records.append(rec)
    return records


def _aggregate(records, methods, taus):
    out = {}
    for tau in taus:
        for method in methods:
            rows = [r for r in records if r["method"] == method and r["tau"] == tau]
            ok = [r for r in rows if not r["error"]]
            entry = {"n_ok": len(ok), "n_failed": len(rows) - len(ok)}
            for metric in ("trace_r2", "align_err", "loading_rmse", "loading_sup"):
                vals = np.array([r[metric] for r in ok], dtype=float)
                vals = vals[np.isfinite(vals)]
                entry[metric] = {
                    "mean": float(np.mean(vals)) if vals.size else None,
                    "median": float(np.median(vals)) if vals.size else None,
                }
            for rule in ("rank_min", "eigen_ratio"):
                hits = [r[f"R_{rule}"] == r["R_true"] for r in ok if r[f"R_{rule}"] >= 0]
                entry[f"accuracy_{rule}"] = float(np.mean(hits)) if hits else None
            out[f"{method}@{tau:g}"] = entry
    return out


def run_monte_carlo(
    spec,
    methods=("QPPCA",),
    taus=(0.5,),
    n_reps=100,
    parallel=False,
    R=None,
    k_n=None,
    R_bar=None,
    d=DEFAULT_D,
    grid=None,
    count_factors=True,
    max_workers=None,
    demean=False,
):
    """Simulate ``n_reps`` panels and score every method at every tau.

    Replication ``r`` draws from a substream spawned off ``spec.seed`` with
    key ``r``, so serial and parallel runs agree exactly. ``R`` fixes the
    number of fitted factors; by default the true count at each tau is used.
    ``demean`` centers each period before plain PCA.
    Failed fits are recorded; the run raises :class:`MonteCarloError` only
    when more than 10% of replications contain a failure.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1")
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
    taus = tuple(float(t) for t in taus)
    for t in taus:
        if not 0.0 < t < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {t}")
    grid = default_grid(spec.D) if grid is None else np.asarray(grid, dtype=float)
    jobs = [(spec, methods, taus, rep, R, k_n, R_bar, d, grid, count_factors, demean) for rep in range(n_reps)]
    if parallel and n_reps > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            chunks = list(pool.map(_run_replication, jobs))
    else:
        chunks = [_run_replication(job) for job in jobs]
    records = [rec for chunk in chunks for rec in chunk]
    failed_reps = len({r["rep"] for r in records if r["error"]})
    if failed_reps > 0.1 * n_reps:
        first = next(r for r in records if r["error"])
        raise MonteCarloError(f"{failed_reps}/{n_reps} replications failed; first: {first['error']}")
    config = {
        "spec": spec.to_dict(),
        "methods": list(methods),
        "taus": list(taus),
        "n_reps": n_reps,
        "R": R,
        "k_n": k_n,
        "R_bar": R_bar,
        "d": d,
        "demean": demean,
    }
    return MetricsReport(
        records=records, aggregates=_aggregate(records, methods, taus), config=config, n_failed_reps=failed_reps
    )
