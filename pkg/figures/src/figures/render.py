"""Render comparison figures from effconc CSV sweeps.

Three figure kinds, selected by id:

1. Known-variance quantile bounds against the sample size (one curve per
   bound) with the Gaussian-limit reference line.
2. The same picture for the unknown-variance (empirical) bounds.
3. Stopping-time benchmark: mean stopping time per rule against the
   aggregation level, with 95% prediction intervals across replications.

This package is strictly a reader of the CSV schemas: values are plotted as
found, never recomputed.  The only derived quantities are the reference
line sigma * PhiInv(1 - delta/2) (one-sided: 1 - delta) and the prediction
intervals of figure 3.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass
from statistics import NormalDist

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy import stats

__all__ = ["FigureError", "FigureSpec", "build_figure", "render", "main"]

_QUANTILE_COLUMNS = ("bound", "n", "sigma", "delta", "sided", "value")
_STOP_COLUMNS = ("replication", "rule", "ell", "n", "stopped")
REFERENCE_LABEL = "gaussian limit"


class FigureError(Exception):
    """Input CSV cannot be rendered (missing file/columns/rows)."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure request: which CSV, which picture, where to write it."""

    input_csv: str
    figure_id: int
    output: str
    xscale: str = "log"
    yscale: str = "linear"
    dpi: int = 150

    def __post_init__(self) -> None:
        if self.figure_id not in (1, 2, 3):
            raise FigureError(
                f"unrecognized figure id {self.figure_id!r}; expected 1, 2 or 3"
            )
        for name in (self.xscale, self.yscale):
            if name not in ("log", "linear"):
                raise FigureError(
                    f"unrecognized axis scale {name!r}; expected log or linear"
                )


def _read_rows(path: str) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            rows = [row for row in csv.reader(handle) if row]
    except OSError as exc:
        raise FigureError(f"cannot read {path}: {exc}")
    if len(rows) < 2:
        raise FigureError(f"{path}: empty CSV, nothing to plot")
    return rows[0], rows[1:]


def _column_indices(
    header: list[str], names: tuple[str, ...], path: str
) -> dict[str, int]:
    missing = [name for name in names if name not in header]
    if missing:
        raise FigureError(
            f"{path}: missing column(s): {', '.join(missing)}"
        )
    return {name: header.index(name) for name in names}


def _parse_float(text: str, column: str, lineno: int, path: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise FigureError(
            f"{path}: line {lineno}: column {column!r}: cannot parse {text!r}"
        )


def _reference_value(sigma: float, delta: float, sided: str) -> float:
    level = 1.0 - delta / 2.0 if sided == "two" else 1.0 - delta
    return sigma * NormalDist().inv_cdf(level)


def _draw_quantile_figure(ax, header, rows, path: str, empirical: bool) -> None:
    idx = _column_indices(header, _QUANTILE_COLUMNS, path)
    curves: dict[tuple, list[tuple[float, float]]] = {}
    settings = set()
    for lineno, row in enumerate(rows, start=2):
        bound = row[idx["bound"]]
        n = _parse_float(row[idx["n"]], "n", lineno, path)
        sigma = _parse_float(row[idx["sigma"]], "sigma", lineno, path)
        delta = _parse_float(row[idx["delta"]], "delta", lineno, path)
        sided = row[idx["sided"]]
        value = _parse_float(row[idx["value"]], "value", lineno, path)
        settings.add((sigma, delta, sided))
        curves.setdefault((bound, sigma, delta, sided), []).append((n, value))
    lone_setting = len(settings) == 1
    for (bound, sigma, delta, sided), points in curves.items():
        points.sort()
        label = (
            bound
            if lone_setting
            else f"{bound} (sigma={sigma:g}, delta={delta:g})"
        )
        ax.plot(
            [n for n, _ in points],
            [value for _, value in points],
            marker="o",
            markersize=3,
            label=label,
        )
    for sigma, delta, sided in sorted(settings):
        reference = _reference_value(sigma, delta, sided)
        label = (
            REFERENCE_LABEL
            if lone_setting
            else f"{REFERENCE_LABEL} (sigma={sigma:g}, delta={delta:g})"
        )
        ax.axhline(
            reference, color="black", linestyle="--", linewidth=1.0,
            label=label,
        )
    ax.set_xlabel("sample size n")
    ax.set_ylabel("quantile bound on S_n")
    ax.set_title(
        "Empirical quantile bounds" if empirical else "Quantile bounds"
    )


def _draw_stop_figure(ax, header, rows, path: str) -> None:
    idx = _column_indices(header, _STOP_COLUMNS, path)
    stop_times: dict[tuple[str, float], dict[str, float]] = {}
    for lineno, row in enumerate(rows, start=2):
        if row[idx["stopped"]] != "true":
            continue
        rule = row[idx["rule"]]
        ell = _parse_float(row[idx["ell"]], "ell", lineno, path)
        n = _parse_float(row[idx["n"]], "n", lineno, path)
        replication = row[idx["replication"]]
        stop_times.setdefault((rule, ell), {})[replication] = n
    if not stop_times:
        raise FigureError(f"{path}: no stopped replications found")
    rules = sorted({rule for rule, _ in stop_times})
    for rule in rules:
        ells = sorted(ell for r, ell in stop_times if r == rule)
        means, halves = [], []
        for ell in ells:
            times = np.array(list(stop_times[rule, ell].values()))
            means.append(float(times.mean()))
            if times.size >= 2:
                spread = float(times.std(ddof=1))
                halves.append(
                    stats.t.ppf(0.975, times.size - 1)
                    * spread
                    * math.sqrt(1.0 + 1.0 / times.size)
                )
            else:
                halves.append(0.0)
        ax.errorbar(
            ells, means, yerr=halves, marker="o", capsize=3, label=rule
        )
    ax.set_xlabel("aggregation level")
    ax.set_ylabel("stopping time n")
    ax.set_title("Stopping times with 95% prediction intervals")


def build_figure(spec: FigureSpec):
    """Build (without saving) the matplotlib Figure for a spec."""
    header, rows = _read_rows(spec.input_csv)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    try:
        if spec.figure_id in (1, 2):
            _draw_quantile_figure(
                ax, header, rows, spec.input_csv, empirical=spec.figure_id == 2
            )
        else:
            _draw_stop_figure(ax, header, rows, spec.input_csv)
        ax.set_xscale(spec.xscale)
        ax.set_yscale(spec.yscale)
        ax.legend()
        fig.tight_layout()
    except Exception:
        plt.close(fig)
        raise
    return fig


def render(spec: FigureSpec) -> str:
    """Render the spec to its output path; returns the path."""
    fig = build_figure(spec)
    try:
        fig.savefig(spec.output, dpi=spec.dpi)
    finally:
        plt.close(fig)
    return spec.output


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="effconc-figures",
        description="Render effconc sweep CSVs as comparison figures.",
    )
    parser.add_argument("--input", required=True, help="sweep CSV to read")
    parser.add_argument(
        "--figure", type=int, required=True, choices=(1, 2, 3),
        help="1: quantile bounds, 2: empirical bounds, 3: stopping times",
    )
    parser.add_argument(
        "--output", required=True, help="image path (png or svg)"
    )
    parser.add_argument(
        "--xscale", choices=("log", "linear"), default="log"
    )
    parser.add_argument(
        "--yscale", choices=("log", "linear"), default="linear"
    )
    parser.add_argument("--dpi", type=int, default=150)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    spec = FigureSpec(
        input_csv=args.input,
        figure_id=args.figure,
        output=args.output,
        xscale=args.xscale,
        yscale=args.yscale,
        dpi=args.dpi,
    )
    try:
        render(spec)
    except FigureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
