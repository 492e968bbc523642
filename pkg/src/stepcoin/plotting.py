"""Static figures for the CLI report path.

Figures are a convenience view of the CSV/JSON data written alongside them.
Styling is fixed and SVG output is made byte-reproducible (fixed hash salt,
no timestamp), so rerunning a preset rewrites identical files.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

WALK_COLORS = {"sdc": "#d95f02", "sic": "#1b9e77", "sdc||sic": "#7570b3"}

RC = {
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "axes.labelsize": 11,
    "axes.titlesize": 11,
    "legend.fontsize": 9,
    "lines.linewidth": 1.4,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.facecolor": "w",
    "svg.fonttype": "none",
    "svg.hashsalt": "stepcoin",
}


def new_figure(width=6.4, height=None, ncols=1, nrows=1):
    """Figure with the package style; height defaults to width times the golden ratio."""
    if height is None:
        height = width * (math.sqrt(5) - 1.0) / 2.0
    with plt.rc_context(RC):
        fig, axes = plt.subplots(nrows, ncols, figsize=(width, height), squeeze=False)
    return fig, axes


def save_svg(fig, path):
    with plt.rc_context(RC):
        fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)


def _style(ax):
    for side in ("top", "right"):
        ax.spines[side].set_visible(False)


def lattice_panels(path, panels, title=None):
    """One panel per (label, sites, probabilities): sites colored and sized by probability."""
    fig, axes = new_figure(width=4.0 * len(panels), height=4.0, ncols=len(panels))
    with plt.rc_context(RC):
        for ax, (label, sites, p) in zip(axes[0], panels):
            sites = np.asarray(sites).reshape(-1, 2)
            p = np.asarray(p)
            sc = ax.scatter(
                sites[:, 0], sites[:, 1], c=p, s=8 + 120 * p / max(p.max(), 1e-300),
                cmap="viridis", vmin=0.0, vmax=max(float(p.max()), 1e-12),
            )
            ax.set_aspect("equal")
            ax.set_xlabel("m")
            ax.set_ylabel("n")
            ax.set_title(label)
            fig.colorbar(sc, ax=ax, shrink=0.8, label="P")
        if title:
            fig.suptitle(title)
    save_svg(fig, path)


def series_plot(path, curves, ylabel, title=None):
    """``curves`` maps a walk label to (steps, values)."""
    fig, axes = new_figure()
    ax = axes[0, 0]
    with plt.rc_context(RC):
        for label, (t, v) in curves.items():
            v = np.asarray(v, dtype=float)
            ax.plot(t, np.where(np.isfinite(v), v, np.nan), label=label,
                    color=WALK_COLORS.get(label), marker=".", markersize=3)
        ax.set_xlabel("t")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        _style(ax)
    save_svg(fig, path)


def sweep_plot(path, curves, ylabel="$L_{loc}$", title=None, log=True):
    """``curves`` maps a label to (omega, l_loc); non-finite points are left out."""
    fig, axes = new_figure()
    ax = axes[0, 0]
    with plt.rc_context(RC):
        for label, (w, y) in curves.items():
            y = np.asarray(y, dtype=float)
            ok = np.isfinite(y) & (y > 0 if log else True)
            ax.plot(np.asarray(w)[ok], y[ok], label=label, color=WALK_COLORS.get(label))
        for x in (-math.pi / 2, math.pi / 2):
            ax.axvline(x, color="0.6", linestyle=":", linewidth=0.8)
        if log:
            ax.set_yscale("log")
        ax.set_xlabel(r"$\omega$")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        _style(ax)
    save_svg(fig, path)
