"""Deterministic file outputs: CSV/JSON writers and best-effort SVG plots.

Every file carries the config hash; floats are written with 17 significant
digits so identical configs reproduce byte-identical CSV.  Plot failures
never fail a run: data files are the authoritative artifacts.
"""

from __future__ import annotations

import json
import math
import os
from typing import Iterable


def fmt(value) -> str:
    """17-significant-digit representation (round-trips float64)."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.17g}"
    if value is None:
        return ""
    return str(value)


def write_csv(path: str, columns: dict[str, Iterable], config_hash: str, extra_header: dict | None = None) -> None:
    names = list(columns)
    rows = list(zip(*[list(columns[name]) for name in names])) if names else []
    lines = [f"# config_sha256={config_hash}"]
    for key, val in (extra_header or {}).items():
        lines.append(f"# {key}={val}")
    lines.append(",".join(names))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_field_csv(path: str, field, config_hash: str) -> None:
    """Snapshot CSV with columns x,re,im (y,re,im on the cylinder)."""
    from .numerics import Grid1D

    label = "x" if isinstance(field.grid, Grid1D) else "y"
    write_csv(
        path,
        {label: field.coordinates(), "re": field.values.real, "im": field.values.imag},
        config_hash,
    )


def write_json(path: str, payload: dict, config_hash: str) -> None:
    body = {"config_sha256": config_hash, **payload}
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _mpl_figure():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def save_line_plot(path: str, xs, series: dict[str, Iterable], xlabel: str, ylabel: str, logy: bool = False) -> bool:
    """Single-axes SVG line plot; returns False (never raises) on failure."""
    try:
        plt = _mpl_figure()
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, ys in series.items():
            ax.plot(xs, ys, label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if logy:
            ax.set_yscale("log")
        if len(series) > 1:
            ax.legend()
        fig.tight_layout()
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        return True
    except Exception:
        return False


def save_loglog_scatter(path: str, xs, ys, fit_slope: float | None, fit_intercept: float | None,
                        xlabel: str, ylabel: str) -> bool:
    try:
        import numpy as np

        plt = _mpl_figure()
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.loglog(xs, ys, "o", ms=4)
        if fit_slope is not None and fit_intercept is not None and len(xs):
            xx = np.asarray(sorted(xs))
            ax.loglog(xx, math.e ** fit_intercept * xx ** fit_slope, "-", lw=1)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        fig.tight_layout()
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        return True
    except Exception:
        return False
