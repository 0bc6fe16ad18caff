"""Experiment reports: named, unit-annotated tables plus fitted quantities."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__


@dataclass
class Table:
    name: str
    columns: list  # (column name, unit) pairs
    rows: list = field(default_factory=list)

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"table {self.name}: expected {len(self.columns)} values")
        self.rows.append([_plain(v) for v in values])

    def column(self, name: str) -> list:
        i = [c for c, _ in self.columns].index(name)
        return [r[i] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"{c} ({u})" for c, u in self.columns])
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def as_dict(self) -> dict:
        return {"name": self.name,
                "columns": [{"name": c, "unit": u} for c, u in self.columns],
                "rows": [[_json_num(v) for v in r] for r in self.rows]}


def _plain(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def _json_num(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


@dataclass
class ExperimentReport:
    command: str
    config_echo: dict = field(default_factory=dict)
    measurements: list = field(default_factory=list)
    fitted_quantities: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    extra_files: dict = field(default_factory=dict)  # file name -> bytes, written beside the tables

    def new_table(self, name: str, columns) -> Table:
        t = Table(name, list(columns))
        self.measurements.append(t)
        return t

    def table(self, name: str) -> Table:
        for t in self.measurements:
            if t.name == name:
                return t
        raise KeyError(name)

    def fit(self, name: str, value, stderr=None) -> None:
        self.fitted_quantities[name] = {"value": _plain(value), "stderr": _plain(stderr)}

    def stamp(self, seed=None, grid=None) -> None:
        self.provenance = {
            "toolkit_version": __version__,
            "seed": seed,
            "grid": None if grid is None else {"dim": grid.dim, "n_points": grid.n_points,
                                                "box_length": grid.box_length},
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }

    def non_finite(self) -> list[str]:
        """Names of every table cell or fitted value that is NaN or infinite."""
        bad = []
        for t in self.measurements:
            for i, row in enumerate(t.rows):
                for (c, _), v in zip(t.columns, row):
                    if isinstance(v, float) and not math.isfinite(v):
                        bad.append(f"{t.name}[{i}].{c}")
        for k, q in self.fitted_quantities.items():
            v = q["value"]
            if isinstance(v, float) and not math.isfinite(v):
                bad.append(k)
        return bad

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config_echo": self.config_echo,
            "measurements": [t.as_dict() for t in self.measurements],
            "fitted_quantities": {k: {kk: _json_num(vv) for kk, vv in v.items()}
                                  for k, v in self.fitted_quantities.items()},
            "provenance": self.provenance,
            "notes": self.notes,
        }

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for t in self.measurements:
            path = out / f"{t.name}.csv"
            path.write_text(t.to_csv(), encoding="utf-8", newline="")
            written.append(path)
        for name, data in self.extra_files.items():
            path = out / name
            path.write_bytes(data)
            written.append(path)
        path = out / "report.json"
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=False, default=str) + "\n",
                        encoding="utf-8")
        written.append(path)
        return written


def loglog_fit(x, y) -> tuple[float, float]:
    """Least-squares slope of log|y| against log x, with its standard error.

    Returns (nan, nan) if any |y| is zero.
    """
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if len(x) < 2 or np.any(y == 0) or np.any(x <= 0):
        return float("nan"), float("nan")
    lx, ly = np.log(x), np.log(y)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    slope = float(coef[0])
    if len(x) > 2:
        resid = ly - A @ coef
        sigma2 = float(resid @ resid) / (len(x) - 2)
        stderr = math.sqrt(sigma2 / float(np.sum((lx - lx.mean()) ** 2)))
    else:
        stderr = 0.0
    return slope, stderr
