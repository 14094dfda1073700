"""Figure builders for covertower CSV outputs.

Each builder reads delimited files produced by the covertower CLI and
returns a matplotlib Figure; rendering is a pure function of the file
contents (fixed style, no randomness), so regenerating from the same CSV
gives structurally identical output.  Builders raise SchemaError when the
required columns are missing.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["SchemaError", "PlotSpec", "read_csv", "plot_decay", "plot_zeros",
           "plot_variance", "plot_asconv", "save_figure"]


class SchemaError(ValueError):
    """Input CSV lacks the columns the figure needs."""


@dataclass(frozen=True)
class PlotSpec:
    """One figure request: inputs, kind, destination."""

    kind: str
    source: str
    out: str
    density: str | None = None


def read_csv(path: str | Path) -> dict:
    """Columns of a delimited file as float arrays (strings where not numeric)."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    cols = {}
    for idx, name in enumerate(header):
        raw = [row[idx] for row in rows]
        try:
            cols[name] = np.array([float(x) for x in raw])
        except ValueError:
            cols[name] = np.array(raw)
    return cols


_LABEL_COLUMNS = frozenset({"psi_id"})


def _require(cols: dict, names: tuple, path) -> None:
    missing = [n for n in names if n not in cols]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    bad = [
        n for n in names
        if n not in _LABEL_COLUMNS and cols[n].dtype.kind not in ("f", "i")
    ]
    if bad:
        raise SchemaError(f"{path}: columns {bad} are not numeric")


def plot_decay(csv_path: str | Path):
    """Log-scale gap versus tower gap with the fitted decay line.

    With a single data point the fit is omitted (points only, warning)."""
    cols = read_csv(csv_path)
    _require(cols, ("tau_j", "gap"), csv_path)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    if "N" in cols:
        groups = sorted(set(int(n) for n in cols["N"]))
    else:
        groups = [None]
    for n in groups:
        if n is None:
            sel = np.ones(cols["tau_j"].size, dtype=bool)
            label = "gap"
        else:
            sel = cols["N"].astype(int) == n
            label = f"N = {n}"
        tau = cols["tau_j"][sel]
        gap = cols["gap"][sel]
        order = np.argsort(tau)
        tau, gap = tau[order], gap[order]
        ax.semilogy(tau, gap, "o-", label=label)
        positive = gap > 0
        if tau[positive].size >= 2:
            slope, intercept = np.polyfit(tau[positive], np.log(gap[positive]), 1)
            xs = np.linspace(tau.min(), tau.max(), 64)
            ax.semilogy(xs, np.exp(intercept + slope * xs), "--", color="gray",
                        linewidth=0.9)
            ax.annotate(
                f"rate {-slope:.2f}",
                (tau[-1], gap[positive][-1]),
                textcoords="offset points",
                xytext=(-8, 10),
                fontsize=9,
            )
        else:
            warnings.warn("single gap point: drawing points without a fit")
    ax.set_xlabel("tower gap tau_j")
    ax.set_ylabel("kernel deviation sup-norm")
    ax.set_title("Quotient-kernel convergence to the model kernel")
    ax.legend(loc="upper right", fontsize=9)
    fig.tight_layout()
    return fig


def plot_zeros(csv_path: str | Path, density_csv: str | Path | None = None):
    """Zero scatter over the base cell, optionally over a density heatmap."""
    cols = read_csv(csv_path)
    _require(cols, ("re", "im"), csv_path)
    fig, ax = plt.subplots(figsize=(5.4, 5.0))
    if density_csv is not None:
        dens = read_csv(density_csv)
        _require(dens, ("x", "y", "metric_density"), density_csv)
        sel = np.ones(dens["x"].size, dtype=bool)
        if "j" in dens:
            sel = dens["j"] == dens["j"].max()
        xs = np.unique(dens["x"][sel])
        ys = np.unique(dens["y"][sel])
        span_x = xs.max() - xs.min()
        span_zeros = cols["re"].max() - cols["re"].min()
        if span_zeros > 1.75 * (xs.max() + (xs[1] - xs[0]) / 2):
            raise SchemaError("zero scatter extends beyond the density domain")
        grid = np.full((xs.size, ys.size), np.nan)
        ix = np.searchsorted(xs, dens["x"][sel])
        iy = np.searchsorted(ys, dens["y"][sel])
        grid[ix, iy] = dens["metric_density"][sel]
        mesh = ax.pcolormesh(
            xs, ys, grid.T, shading="nearest", cmap="viridis", alpha=0.85
        )
        fig.colorbar(mesh, ax=ax, label="curvature density")
    ax.plot(cols["re"], cols["im"], ".", color="crimson", markersize=2.0,
            label="zeros")
    ax.set_xlabel("Re z")
    ax.set_ylabel("Im z")
    ax.set_title("Section zeros over the base cell")
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=9)
    fig.tight_layout()
    return fig


def plot_variance(csv_path: str | Path):
    """Analytic variance, empirical bars and the decay envelope per level."""
    cols = read_csv(csv_path)
    _require(cols, ("j", "theory_var"), csv_path)
    has_bound = "paper_bound" in cols
    if not has_bound:
        warnings.warn("no paper_bound column: envelope omitted")
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    if "psi_id" in cols:
        names = sorted(set(cols["psi_id"].tolist()))
    else:
        names = [None]
    for name in names:
        sel = (
            np.ones(cols["j"].size, dtype=bool)
            if name is None
            else cols["psi_id"] == name
        )
        js = cols["j"][sel]
        order = np.argsort(js)
        js = js[order]
        label = name if name is not None else "theory"
        ax.plot(js, cols["theory_var"][sel][order], "o-", label=f"{label} analytic")
        if "emp_var" in cols:
            emp = cols["emp_var"][sel][order]
            good = ~np.isnan(emp)
            if np.any(good):
                err = None
                if "emp_stderr" in cols:
                    err = cols["emp_stderr"][sel][order][good]
                ax.errorbar(
                    js[good], emp[good], yerr=err, fmt="s", capsize=3,
                    label=f"{label} sampled",
                )
        if has_bound:
            ax.plot(js, cols["paper_bound"][sel][order], ":", color="gray")
    if np.any(cols["theory_var"] > 0):
        ax.set_yscale("log")
    ax.set_xlabel("tower level j")
    ax.set_ylabel("pairing variance")
    ax.set_title("Zero-current variance along the tower")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def plot_asconv(csv_path: str | Path):
    """Fixed-seed pairing error traces along the tower."""
    cols = read_csv(csv_path)
    _require(cols, ("j", "psi_id", "abs_error"), csv_path)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for name in sorted(set(cols["psi_id"].tolist())):
        sel = cols["psi_id"] == name
        js = cols["j"][sel]
        order = np.argsort(js)
        floor = np.maximum(cols["abs_error"][sel][order], 1e-18)
        ax.semilogy(js[order], floor, "o-", label=name)
    ax.set_xlabel("tower level j")
    ax.set_ylabel("|pairing - limit|")
    ax.set_title("Single-path pairing convergence")
    ax.legend(fontsize=9)
    fig.tight_layout()
    return fig


def save_figure(fig, out: str | Path) -> None:
    """Write the figure; format follows the file extension (svg or png)."""
    out = Path(out)
    if out.suffix.lower() not in (".svg", ".png"):
        raise ValueError("output must be .svg or .png")
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    plt.close(fig)
