"""Command-line front end: ``cqfm fit``, ``cqfm simulate``, ``cqfm select-rank``.

Settings come from defaults, then an optional JSON config file
(``--config``), then command-line flags. Failures exit nonzero with a JSON
object on stderr::

    {"error": "StageError", "message": "...", "stage": "first_step", "tau": 0.5}
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import scipy

from . import __version__
from .data import load_panel, write_csv
from .exceptions import CqfmError, StageError
from .factor_count import DEFAULT_D, DEFAULT_EXPONENT, default_r_bar, select_num_factors
from .qppca import estimate_from_fit, prepare_design
from .quantreg import DEFAULT_TOL, fit_least_squares_panel, fit_quantile_panel
from .simulate import METHODS, DgpSpec, ErrorDist, FactorProcess, run_monte_carlo

__all__ = ["RunConfig", "ConfigError", "cmd_fit", "cmd_simulate", "cmd_select_rank", "main"]

N_TABLE_EIGENVALUES = 5


class ConfigError(CqfmError, ValueError):
    pass


@dataclass
class RunConfig:
    """All run settings, with defaults.

    Data: ``returns``, ``characteristics`` (CSV paths, used by fit and
    select-rank). Estimation: ``taus``, ``k_n`` (None -> max(2, round(n^(1/3)))),
    ``R`` (None -> rank-minimization count per tau, at least 1), ``R_bar``
    (None -> min(8, T-1)), ``d``, ``exponent``, ``tol``, ``methods``,
    ``demean`` (PCA baseline only), ``grid_points``. Output: ``output_dir``.
    Simulation: ``n``, ``T``, ``D``, ``R_loc``, ``include_scale_factor``,
    ``error_dist``, ``factor_process``, ``noise_scale``, ``n_reps``,
    ``seed``, ``parallel``.
    """

    returns: str | None = None
    characteristics: str | None = None
    taus: list = field(default_factory=lambda: [0.05, 0.25, 0.5, 0.75, 0.95])
    k_n: int | None = None
    R: int | None = None
    R_bar: int | None = None
    d: float = DEFAULT_D
    exponent: float = DEFAULT_EXPONENT
    tol: float = DEFAULT_TOL
    methods: list = field(default_factory=lambda: ["QPPCA", "PPCA"])
    demean: bool = False
    grid_points: int = 101
    output_dir: str = "cqfm_output"
    seed: int = 0
    n: int = 500
    T: int = 10
    D: int = 2
    R_loc: int = 2
    include_scale_factor: bool = False
    error_dist: str = "normal"
    factor_process: str = "iid_normal"
    noise_scale: float = 1.0
    n_reps: int = 100
    parallel: bool = False

    @classmethod
    def from_mapping(cls, values):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def validate(self):
        self.taus = [float(t) for t in self.taus]
        if not self.taus:
            raise ConfigError("at least one tau is required")
        for t in self.taus:
            if not 0.0 < t < 1.0:
                raise ConfigError(f"tau must lie in (0, 1), got {t}")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; choose from {list(METHODS)}")
        if self.k_n is not None and self.k_n < 1:
            raise ConfigError("k_n must be at least 1")
        if self.R is not None and self.R < 1:
            raise ConfigError("R must be at least 1")
        if self.R_bar is not None and self.R_bar < 1:
            raise ConfigError("R_bar must be at least 1")
        if self.d <= 0:
            raise ConfigError("d must be positive")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.grid_points < 2:
            raise ConfigError("grid_points must be at least 2")
        if self.n_reps < 1:
            raise ConfigError("n_reps must be at least 1")
        try:
            ErrorDist(self.error_dist)
            FactorProcess(self.factor_process)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def to_dict(self):
        return dataclasses.asdict(self)


def _tau_label(tau):
    return f"{tau:g}"


def _environment():
    return {
        "cqfm": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }


def _write_manifest(out, command, config, outputs, timings, extra=None):
    manifest = {
        "command": command,
        "config": config.to_dict(),
        "versions": _environment(),
        "seed": config.seed,
        "timings_seconds": timings,
        "outputs": sorted(outputs),
    }
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def _require_data(config):
    if not config.returns or not config.characteristics:
        raise ConfigError("both 'returns' and 'characteristics' CSV paths are required")
    return load_panel(config.returns, config.characteristics)


def _count_row(label, tau, fc, rule):
    row = {"row": label, "tau": "" if tau is None else tau}
    for j in range(N_TABLE_EIGENVALUES):
        row[f"eig_{j + 1}"] = fc.eigenvalues[j] if j < fc.eigenvalues.size else np.nan
    row["p_n"] = fc.p_n if rule == "rank_min" else np.nan
    row["R_hat"] = fc.R_rank_min if rule == "rank_min" else fc.R_eigen_ratio
    row["R_rank_min"] = fc.R_rank_min
    row["R_eigen_ratio"] = fc.R_eigen_ratio
    row["d"] = fc.d
    row["R_bar"] = fc.R_bar
    return row


def _first_steps(panel, config, Z):
    """Yield (label, tau, fit) for the PPCA mean row and each quantile."""
    if "PPCA" in config.methods:
        try:
            yield "mean(PPCA)", None, fit_least_squares_panel(panel.Y, Z)
        except (CqfmError, ValueError) as exc:
            raise StageError("first_step", str(exc)) from exc
    for tau in config.taus:
        try:
            yield "quantile", tau, fit_quantile_panel(panel.Y, Z, tau, tol=config.tol)
        except (CqfmError, ValueError) as exc:
            raise StageError("first_step", str(exc), tau=tau) from exc


def _select(fit, config, tau):
    try:
        return select_num_factors(fit, R_bar=config.R_bar, d=config.d, exponent=config.exponent)
    except ValueError as exc:
        raise StageError("select_rank", str(exc), tau=tau) from exc


def _check_T(panel):
    if panel.T < 2:
        raise StageError("select_rank", f"factor counting needs T >= 2 (ln T > 0), got T={panel.T}")


def cmd_select_rank(config):
    """Factor-count table (eigenvalues, threshold, estimates) per tau.

    Writes ``factor_count.csv`` and ``manifest.json`` in ``output_dir``.
    """
    t0 = time.perf_counter()
    panel = _require_data(config)
    _check_T(panel)
    Z, _, _ = prepare_design(panel, config.k_n)
    rows = []
    for label, tau, fit in _first_steps(panel, config, Z):
        fc = _select(fit, config, tau)
        rows.append(_count_row(label, tau, fc, "eigen_ratio" if tau is None else "rank_min"))
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = pd.DataFrame(rows)
    write_csv(table, out / "factor_count.csv")
    _write_manifest(
        out, "select-rank", config, ["factor_count.csv"], {"total": time.perf_counter() - t0}
    )
    return table


def _loading_grid(est, names, m):
    """Vary one standardized characteristic over its observed range, others at 0."""
    rows = []
    lo, hi = est.basis.lower, est.basis.upper
    for d, name in enumerate(names):
        grid = np.zeros((m, len(names)))
        grid[:, d] = np.linspace(lo[d], hi[d], m)
        vals = est.loading_function(grid, standardized=True)
        for k in range(m):
            row = {"characteristic": name, "value": grid[k, d]}
            row.update({f"g_{r + 1}": vals[k, r] for r in range(est.R)})
            rows.append(row)
    return pd.DataFrame(rows)


def _factor_frame(est, time_ids):
    df = pd.DataFrame({"time_id": list(time_ids)})
    for r in range(est.R):
        df[f"F_hat_{r + 1}"] = est.F_hat[:, r]
    for r in range(est.R):
        df[f"F_tilde_{r + 1}"] = est.F_tilde[:, r]
    return df


def cmd_fit(config):
    """Full empirical pipeline for every tau (and PPCA when requested).

    Outputs in ``output_dir``: ``factor_count.csv``, per tau
    ``factors_tau{tau}.csv``, ``loadings_tau{tau}.csv``,
    ``quantile_returns_tau{tau}.csv``; PPCA ``factors_ppca.csv`` and
    ``loadings_ppca.csv``; ``factor_correlations.csv`` (first factors across
    tau and PPCA, with sample means); ``manifest.json``.
    """
    t0 = time.perf_counter()
    timings = {}
    panel = _require_data(config)
    _check_T(panel)
    try:
        Z, basis, standardizer = prepare_design(panel, config.k_n)
    except ValueError as exc:
        raise StageError("prepare_design", str(exc)) from exc
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs, warnings, count_rows, firsts, chosen_R = [], {}, [], {}, {}
    for label, tau, fit in _first_steps(panel, config, Z):
        ts = time.perf_counter()
        key = "ppca" if tau is None else f"tau{_tau_label(tau)}"
        fc = _select(fit, config, tau)
        count_rows.append(_count_row(label, tau, fc, "eigen_ratio" if tau is None else "rank_min"))
        if config.R is not None:
            R = config.R
        else:
            R = fc.R_eigen_ratio if tau is None else fc.R_rank_min
            if R == 0:
                warnings.setdefault(key, []).append("rank-minimization selected 0 factors; using R=1")
                R = 1
        chosen_R[key] = R
        method = "PPCA" if tau is None else "QPPCA"
        try:
            est = estimate_from_fit(fit, R, basis, standardizer, tau=tau, method=method)
        except (CqfmError, ValueError, np.linalg.LinAlgError) as exc:
            raise StageError("factors", str(exc), tau=tau) from exc
        if est.warnings:
            warnings.setdefault(key, []).extend(est.warnings)
        write_csv(_factor_frame(est, panel.time_ids), out / f"factors_{key}.csv")
        write_csv(_loading_grid(est, panel.characteristic_names, config.grid_points), out / f"loadings_{key}.csv")
        outputs += [f"factors_{key}.csv", f"loadings_{key}.csv"]
        if tau is not None:
            qr = pd.DataFrame(est.quantile_returns, columns=list(panel.time_ids))
            qr.insert(0, "unit_id", list(panel.unit_ids))
            write_csv(qr, out / f"quantile_returns_{key}.csv")
            outputs.append(f"quantile_returns_{key}.csv")
            firsts[f"tau={_tau_label(tau)}"] = est.F_hat[:, 0]
        else:
            ppca_first = est.F_hat[:, 0]
        timings[key] = time.perf_counter() - ts
    if "PPCA" in config.methods:
        firsts["PPCA"] = ppca_first
    write_csv(pd.DataFrame(count_rows), out / "factor_count.csv")
    outputs.append("factor_count.csv")

    labels = list(firsts)
    M = np.column_stack([firsts[k] for k in labels])
    corr = np.corrcoef(M, rowvar=False) if M.shape[1] > 1 else np.ones((1, 1))
    corr = np.atleast_2d(corr)
    table = pd.DataFrame(corr, columns=labels)
    table.insert(0, "factor", labels)
    table["mean"] = M.mean(axis=0)
    write_csv(table, out / "factor_correlations.csv")
    outputs.append("factor_correlations.csv")

    timings["total"] = time.perf_counter() - t0
    _write_manifest(
        out,
        "fit",
        config,
        outputs,
        timings,
        {"n": panel.n, "T": panel.T, "D": panel.D, "k_n": basis.k_n, "R_used": chosen_R, "warnings": warnings},
    )
    return outputs


def cmd_simulate(config):
    """Monte Carlo run; writes ``simulation_records.csv``,
    ``simulation_summary.json`` and ``manifest.json``."""
    t0 = time.perf_counter()
    spec = DgpSpec(
        n=config.n,
        T=config.T,
        D=config.D,
        R_loc=config.R_loc,
        include_scale_factor=config.include_scale_factor,
        error_dist=config.error_dist,
        factor_process=config.factor_process,
        seed=config.seed,
        noise_scale=config.noise_scale,
    )
    report = run_monte_carlo(
        spec,
        methods=config.methods,
        taus=config.taus,
        n_reps=config.n_reps,
        parallel=config.parallel,
        R=config.R,
        k_n=config.k_n,
        R_bar=config.R_bar,
        d=config.d,
        demean=config.demean,
    )
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(pd.DataFrame(report.records), out / "simulation_records.csv")
    (out / "simulation_summary.json").write_text(report.to_json())
    _write_manifest(
        out,
        "simulate",
        config,
        ["simulation_records.csv", "simulation_summary.json"],
        {"total": time.perf_counter() - t0},
    )
    return report


def _add_flags(p):
    p.add_argument("--config", help="JSON file with RunConfig keys")
    p.add_argument("--returns", help="returns CSV: unit id, then one column per date")
    p.add_argument("--characteristics", help="characteristics CSV: unit id, then one column per characteristic")
    p.add_argument("--taus", type=float, nargs="+")
    p.add_argument("--k-n", dest="k_n", type=int)
    p.add_argument("--R", dest="R", type=int)
    p.add_argument("--R-bar", dest="R_bar", type=int)
    p.add_argument("--d", type=float)
    p.add_argument("--exponent", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--methods", nargs="+")
    p.add_argument("--demean", action="store_const", const=True)
    p.add_argument("--grid-points", dest="grid_points", type=int)
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--seed", type=int)


def _add_sim_flags(p):
    p.add_argument("--n", type=int)
    p.add_argument("--T", dest="T", type=int)
    p.add_argument("--D", dest="D", type=int)
    p.add_argument("--R-loc", dest="R_loc", type=int)
    p.add_argument("--include-scale-factor", dest="include_scale_factor", action="store_const", const=True)
    p.add_argument("--error-dist", dest="error_dist", choices=[e.value for e in ErrorDist])
    p.add_argument("--factor-process", dest="factor_process", choices=[f.value for f in FactorProcess])
    p.add_argument("--noise-scale", dest="noise_scale", type=float)
    p.add_argument("--n-reps", dest="n_reps", type=int)
    p.add_argument("--parallel", action="store_const", const=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="cqfm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("fit", "estimate factors, loading functions and quantile returns"),
        ("select-rank", "estimate the number of factors per quantile"),
        ("simulate", "run a Monte Carlo study"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_flags(p)
        if name == "simulate":
            _add_sim_flags(p)
    return parser


def resolve_config(args):
    values = {}
    if args.config:
        try:
            values = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(values, dict):
            raise ConfigError("config file must hold a JSON object")
    for k, v in vars(args).items():
        if k in ("config", "command") or v is None:
            continue
        values[k] = v
    return RunConfig.from_mapping(values)


COMMANDS = {"fit": cmd_fit, "select-rank": cmd_select_rank, "simulate": cmd_simulate}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
        COMMANDS[args.command](config)
    except Exception as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, StageError):
            payload.update(stage=exc.stage, tau=exc.tau, message=exc.detail)
        print(json.dumps(payload), file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
