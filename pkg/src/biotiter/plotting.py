"""Figures for benchmark reports (non-interactive backend, reproducible PNGs)."""
from __future__ import annotations

import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# no timestamp or software tag, so repeated runs give identical files
_PNG_META = {"Software": None}


def _save(fig, path):
    tmp = f"{path}.tmp"
    fig.savefig(tmp, format="png", dpi=100, metadata=_PNG_META)
    plt.close(fig)
    os.replace(tmp, path)


def plot_histories(rows, path, title=None):
    """Stopping quantity per iteration, one line per report row."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for r in rows:
        if r.history:
            ax.semilogy(range(1, len(r.history) + 1), r.history, marker="o", ms=3, label=r.experiment)
    ax.set_xlabel("iteration")
    ax.set_ylabel("increment norm")
    if title:
        ax.set_title(title)
    if any(r.history for r in rows):
        ax.legend(fontsize=7)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_sweep(rows, axis, values, path, title=None):
    """Iteration count against the swept value, one line per scheme."""
    by_scheme = defaultdict(list)
    for r, v in zip(rows, values):
        by_scheme[r.scheme].append((float(v), r.iters if r.status == "Converged" else float("nan")))
    fig, ax = plt.subplots(figsize=(6, 4))
    for scheme in sorted(by_scheme):
        xs, ys = zip(*by_scheme[scheme])
        ax.plot(xs, ys, marker="o", label=scheme)
    ax.set_xlabel(axis)
    ax.set_ylabel("iterations (last step)")
    if axis in ("tau", "h"):
        ax.set_xscale("log")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, path)
