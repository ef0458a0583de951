"""Power-curve figures for the report command (Agg backend, files only)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_COLOURS = {"standard": "tab:blue", "warped": "tab:green", "hbp": "tab:red"}


def plot_power_curve(x, y, grid, bands, path, title=None, max_points=4000):
    """Scatter of (x, y) with one mean line and 95% band per model.

    ``bands`` maps a model name to (mean, lower, upper) arrays on ``grid``.
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.size > max_points:
        keep = np.linspace(0, x.size - 1, max_points).astype(int)
        x, y = x[keep], y[keep]
    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=120)
    ax.scatter(x, y, s=3, c="0.45", alpha=0.5, linewidths=0, label="data")
    for name, (mean, lo, hi) in bands.items():
        c = _COLOURS.get(name, None)
        ax.plot(grid, mean, color=c, lw=1.5, label=name)
        ax.fill_between(grid, lo, hi, color=c, alpha=0.2, lw=0)
    ax.axhline(0.0, color="k", lw=0.6, ls=":")
    ax.axhline(1.0, color="k", lw=0.6, ls=":")
    ax.set_xlabel("normalised wind speed")
    ax.set_ylabel("normalised power")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper left", fontsize=8, frameon=False)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_traces(traces, path):
    """ELBO against iteration, one line per model."""
    fig, ax = plt.subplots(figsize=(6.4, 3.6), dpi=120)
    for name, trace in traces.items():
        if not trace:
            continue
        it, val = np.asarray(trace, dtype=float).T
        ax.plot(it, val, color=_COLOURS.get(name), label=name)
    ax.set_xlabel("iteration")
    ax.set_ylabel("ELBO")
    ax.set_yscale("symlog")
    ax.legend(fontsize=8, frameon=False)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path
