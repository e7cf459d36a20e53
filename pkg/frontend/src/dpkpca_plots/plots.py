"""Render benchmark CSVs as mean-line figures with 95% confidence bands.

Usage:
    plots --csv results/fig1a.csv --preset fig1a --out fig1a.svg
    plots --csv results/run.csv --x n --y utility --filter k=2 --out out.svg

Each line is one algorithm: the mean of the y metric over trials at each
x value, with a shaded band of mean +- 1.96 * stderr (normal approximation;
``--bootstrap`` switches to a percentile bootstrap).  Output is deterministic:
re-rendering the same CSV with the same spec produces identical bytes.
"""

import argparse
import csv
import math
import sys
from dataclasses import dataclass, field
from typing import Optional

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "dpkpca-plots"
import matplotlib.pyplot as plt  # noqa: E402


class SchemaError(Exception):
    """The CSV does not carry a column the figure spec references."""


class UsageError(Exception):
    """Bad command-line arguments."""


#: Derived y metrics that are computed from CSV columns rather than read directly.
_DERIVED_Y = {
    "utility": ("captured_energy", "optimal_energy"),
}

_NUMERIC = ("n", "d", "k", "sigma", "gap", "epsilon", "delta", "trial",
            "zeta2", "captured_energy", "optimal_energy", "sine", "frob_sq")

_AXIS_LABELS = {
    "n": "samples n",
    "d": "dimension d",
    "gap": "eigengap",
    "sigma": "noise level sigma",
    "epsilon": "privacy budget epsilon",
    "utility": "captured energy ratio",
    "zeta2": "residual energy zeta^2",
    "sine": "principal angle sine",
}


@dataclass(frozen=True)
class FigureSpec:
    x: str
    y: str = "utility"
    group_by: str = "algorithm"
    filters: dict = field(default_factory=dict)
    log_x: bool = False
    log_y: bool = False
    title: str = ""


PRESETS = {
    "fig1a": FigureSpec(x="n", log_x=True, log_y=True,
                        title="utility vs sample size (sigma = 0.025)"),
    "fig1b": FigureSpec(x="n", log_x=True, log_y=True,
                        title="utility vs sample size (sigma = 0.001)"),
    "fig1c": FigureSpec(x="d", log_x=True,
                        title="utility vs ambient dimension"),
    "fig2a": FigureSpec(x="gap",
                        title="utility vs eigengap"),
    "fig2b": FigureSpec(x="sigma", log_x=True,
                        title="utility vs noise level"),
    "fig2c": FigureSpec(x="n", log_x=True, log_y=True,
                        title="utility vs sample size, all algorithms"),
}


def load_rows(csv_path: str) -> list[dict]:
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{csv_path}: no data rows")
    for row in rows:
        for col in _NUMERIC:
            if col in row:
                row[col] = float(row[col])
    return rows


def _require(rows: list[dict], column: str) -> None:
    if column not in rows[0]:
        raise SchemaError(f"CSV is missing column {column!r}")


def _y_values(rows: list[dict], y: str) -> np.ndarray:
    if y in _DERIVED_Y:
        num, den = _DERIVED_Y[y]
        return np.array([r[num] / r[den] for r in rows])
    return np.array([r[y] for r in rows])


def _band(values: np.ndarray, bootstrap: bool) -> float:
    if values.size < 2:
        return 0.0
    if bootstrap:
        rng = np.random.default_rng(0)
        means = rng.choice(values, size=(2000, values.size)).mean(axis=1)
        lo, hi = np.percentile(means, [2.5, 97.5])
        return float((hi - lo) / 2.0)
    return float(1.96 * values.std(ddof=1) / math.sqrt(values.size))


def apply_filters(rows: list[dict], filters: dict) -> list[dict]:
    for column in filters:
        _require(rows, column)
    kept = []
    for row in rows:
        ok = True
        for column, wanted in filters.items():
            have = row[column]
            if isinstance(have, float):
                ok = ok and have == float(wanted)
            else:
                ok = ok and have == wanted
        if ok:
            kept.append(row)
    if not kept:
        raise SchemaError(f"no rows match filters {filters!r}")
    return kept


def series(rows: list[dict], spec: FigureSpec, bootstrap: bool = False) -> dict:
    """Group rows and reduce to {group: (xs, means, halfwidths)}."""
    _require(rows, spec.x)
    _require(rows, spec.group_by)
    if spec.y in _DERIVED_Y:
        for col in _DERIVED_Y[spec.y]:
            _require(rows, col)
    else:
        _require(rows, spec.y)
    if spec.filters:
        rows = apply_filters(rows, spec.filters)
    rows = [r for r in rows if r.get("status", "ok") == "ok"]
    if not rows:
        raise SchemaError("no successful rows to plot")
    out = {}
    for group in sorted({r[spec.group_by] for r in rows}):
        grouped = [r for r in rows if r[spec.group_by] == group]
        xs = sorted({r[spec.x] for r in grouped})
        means, halves = [], []
        for x in xs:
            vals = _y_values([r for r in grouped if r[spec.x] == x], spec.y)
            means.append(float(vals.mean()))
            halves.append(_band(vals, bootstrap))
        out[group] = (np.array(xs), np.array(means), np.array(halves))
    return out


def render(csv_path: str, spec: FigureSpec, out_path: str, bootstrap: bool = False) -> None:
    """Write one figure: a mean line plus confidence band per group."""
    curves = series(load_rows(csv_path), spec, bootstrap=bootstrap)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, (xs, means, halves) in curves.items():
        ax.plot(xs, means, marker="o", markersize=3.5, label=label)
        ax.fill_between(xs, means - halves, means + halves, alpha=0.2)
    if spec.log_x:
        ax.set_xscale("log")
    if spec.log_y:
        ax.set_yscale("log")
    ax.set_xlabel(_AXIS_LABELS.get(spec.x, spec.x))
    ax.set_ylabel(_AXIS_LABELS.get(spec.y, spec.y))
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, metadata=_no_timestamp_metadata(out_path))
    plt.close(fig)


def _no_timestamp_metadata(out_path: str) -> Optional[dict]:
    if out_path.endswith(".svg"):
        return {"Date": None}
    if out_path.endswith(".png"):
        return {"Software": None}
    return None


def parse_filters(pairs: list[str]) -> dict:
    filters = {}
    for pair in pairs:
        if "=" not in pair:
            raise UsageError(f"bad --filter {pair!r}; expected column=value")
        column, value = pair.split("=", 1)
        filters[column.strip()] = value.strip()
    return filters


def build_spec(args) -> FigureSpec:
    if args.preset:
        if args.preset not in PRESETS:
            raise UsageError(
                f"unknown preset {args.preset!r}; available: {', '.join(sorted(PRESETS))}")
        base = PRESETS[args.preset]
        filters = {**base.filters, **parse_filters(args.filter)}
        return FigureSpec(x=args.x or base.x, y=args.y or base.y,
                          filters=filters, log_x=base.log_x, log_y=base.log_y,
                          title=base.title)
    if not args.x:
        raise UsageError("either --preset or --x is required")
    return FigureSpec(x=args.x, y=args.y or "utility",
                      filters=parse_filters(args.filter))


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="plots", description=__doc__.splitlines()[0])
    parser.add_argument("--csv", required=True, help="benchmark CSV to read")
    parser.add_argument("--out", required=True, help="output image (.svg or .png)")
    parser.add_argument("--preset", help=f"figure preset: {', '.join(sorted(PRESETS))}")
    parser.add_argument("--x", help="x-axis column")
    parser.add_argument("--y", help="y metric: utility, zeta2, sine, or any numeric column")
    parser.add_argument("--filter", action="append", default=[], metavar="COL=VALUE",
                        help="keep only rows where COL equals VALUE (repeatable)")
    parser.add_argument("--bootstrap", action="store_true",
                        help="percentile-bootstrap bands instead of normal approximation")
    args = parser.parse_args(argv)
    try:
        render(args.csv, build_spec(args), args.out, bootstrap=args.bootstrap)
    except (UsageError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
