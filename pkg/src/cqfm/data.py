"""Panel container and CSV readers/writers."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

__all__ = ["PanelData", "load_panel", "save_panel", "read_matrix_csv", "write_csv"]

FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class PanelData:
    """Outcomes ``Y`` (n x T) with raw characteristics ``X`` (n x D)."""

    Y: np.ndarray
    X: np.ndarray
    unit_ids: tuple = ()
    time_ids: tuple = ()
    characteristic_names: tuple = ()

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if Y.ndim != 2:
            raise ValueError(f"Y must be 2-d, got shape {Y.shape}")
        if X.ndim != 2 or X.shape[0] != Y.shape[0]:
            raise ValueError(f"X rows ({X.shape[0]}) must match Y rows ({Y.shape[0]})")
        if not np.all(np.isfinite(Y)):
            i, t = np.argwhere(~np.isfinite(Y))[0]
            raise ValueError(f"missing or non-finite outcome at row {i}, column {t}")
        if not np.all(np.isfinite(X)):
            i, d = np.argwhere(~np.isfinite(X))[0]
            raise ValueError(f"missing or non-finite characteristic at row {i}, column {d}")
        n, T = Y.shape
        D = X.shape[1]
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "unit_ids", tuple(self.unit_ids) or tuple(f"u{i}" for i in range(n)))
        object.__setattr__(self, "time_ids", tuple(self.time_ids) or tuple(f"t{t}" for t in range(T)))
        object.__setattr__(
            self,
            "characteristic_names",
            tuple(self.characteristic_names) or tuple(f"x{d + 1}" for d in range(D)),
        )
        if len(self.unit_ids) != n or len(self.time_ids) != T or len(self.characteristic_names) != D:
            raise ValueError("id/label lengths do not match panel dimensions")

    @property
    def n(self):
        return self.Y.shape[0]

    @property
    def T(self):
        return self.Y.shape[1]

    @property
    def D(self):
        return self.X.shape[1]

    def permute_units(self, perm):
        perm = np.asarray(perm)
        return PanelData(
            Y=self.Y[perm],
            X=self.X[perm],
            unit_ids=tuple(self.unit_ids[i] for i in perm),
            time_ids=self.time_ids,
            characteristic_names=self.characteristic_names,
        )


def _read_numeric(path, what):
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    if df.shape[1] < 2:
        raise ValueError(f"{what} file {path}: need an id column plus at least one data column")
    ids = df.iloc[:, 0].tolist()
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise ValueError(f"{what} file {path}: duplicate unit id {dup!r}")
    cols = list(df.columns[1:])
    values = np.empty((len(ids), len(cols)))
    for j, col in enumerate(cols):
        for i, cell in enumerate(df[col]):
            text = cell.strip()
            if text == "" or text.lower() in ("na", "nan", "null"):
                raise ValueError(f"{what} file {path}: missing value at row {i + 1} ({ids[i]!r}), column {col!r}")
            try:
                v = float(text)
            except ValueError:
                raise ValueError(
                    f"{what} file {path}: non-numeric cell {cell!r} at row {i + 1} ({ids[i]!r}), column {col!r}"
                ) from None
            if not np.isfinite(v):
                raise ValueError(f"{what} file {path}: non-finite value at row {i + 1} ({ids[i]!r}), column {col!r}")
            values[i, j] = v
    return ids, cols, values


def load_panel(returns_csv, characteristics_csv):
    """Read a panel from two CSV files.

    ``returns_csv`` has the unit id in its first column and one column per
    date; ``characteristics_csv`` has the unit id plus one named column per
    characteristic. Ids must match one-to-one; rows come out in the order of
    the characteristics file.
    """
    r_ids, dates, Y = _read_numeric(returns_csv, "returns")
    c_ids, names, X = _read_numeric(characteristics_csv, "characteristics")
    c_set, r_set = set(c_ids), set(r_ids)
    missing_c = [i for i in r_ids if i not in c_set]
    if missing_c:
        raise ValueError(f"unit id {missing_c[0]!r} present in returns but not in characteristics")
    missing_r = [i for i in c_ids if i not in r_set]
    if missing_r:
        raise ValueError(f"unit id {missing_r[0]!r} present in characteristics but not in returns")
    pos = {u: k for k, u in enumerate(r_ids)}
    Y = Y[[pos[u] for u in c_ids]]
    return PanelData(Y=Y, X=X, unit_ids=tuple(c_ids), time_ids=tuple(dates), characteristic_names=tuple(names))


def save_panel(panel, returns_csv, characteristics_csv):
    """Write ``panel`` in the layout read by :func:`load_panel`."""
    ret = pd.DataFrame(panel.Y, columns=list(panel.time_ids))
    ret.insert(0, "unit_id", list(panel.unit_ids))
    ret.to_csv(returns_csv, index=False, float_format=FLOAT_FORMAT)
    ch = pd.DataFrame(panel.X, columns=list(panel.characteristic_names))
    ch.insert(0, "unit_id", list(panel.unit_ids))
    ch.to_csv(characteristics_csv, index=False, float_format=FLOAT_FORMAT)


def write_csv(df, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def read_matrix_csv(path):
    """Read a CSV written by this package back into a DataFrame."""
    return pd.read_csv(path)
