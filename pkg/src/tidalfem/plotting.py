"""Static SVG figures of emitted series.  The CSV files stay authoritative."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(Path(path), format="svg")
    plt.close(fig)
    return Path(path)


def plot_series(path, t, series: dict, ylabel="", logy=False, title=""):
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in series.items():
        y = np.asarray(y)
        if logy:
            ax.semilogy(t, np.abs(y), label=label)
        else:
            ax.plot(t, y, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend()
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def plot_convergence(path, h, errors, slope=None, label="eta error"):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(h, errors, "o-", label=label)
    if slope is not None:
        h = np.asarray(h)
        ref = errors[-1] * (h / h[-1]) ** slope
        ax.loglog(h, ref, "k--", label=f"slope {slope:.2f}")
    ax.set_xlabel("h")
    ax.set_ylabel("time-averaged L2 error")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)
