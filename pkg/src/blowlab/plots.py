"""Matplotlib figure renderers for the report paths.

Figures are written to files next to the delimited outputs; the CSVs
remain the data contract, the figures are for eyes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .basin import (LABEL_BLOWUP, LABEL_BOUNDED, LABEL_FAILURE, BasinGrid,
                    BoundaryCurve)

_BASIN_COLORS = {LABEL_BOUNDED: (0.85, 0.12, 0.12),   # red: no blow-up
                 LABEL_BLOWUP: (0.12, 0.25, 0.85),    # blue: blow-up
                 LABEL_FAILURE: (0.55, 0.55, 0.55)}


def plot_timeseries(traj, path, logy: bool = True, n_samples: int = 1200, title: str = ""):
    ts = np.linspace(traj.t_start, traj.t_end, n_samples)
    states = traj.sample(ts)
    xs = [s.X for s in states]
    ys = [s.Y for s in states]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(ts, xs, color="tab:green")
    ax1.set_ylabel("prey X")
    ax2.plot(ts, ys, color="tab:purple")
    ax2.set_ylabel("predator Y")
    ax2.set_xlabel("t")
    if logy and min(ys) > 0:
        ax2.set_yscale("log")
    if title:
        ax1.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_basin(grid: BasinGrid, path, title: str = ""):
    img = np.zeros((grid.spec.ny, grid.spec.nx, 3))
    for code, rgb in _BASIN_COLORS.items():
        mask = (grid.labels.T == code)
        img[mask] = rgb
    fig, ax = plt.subplots(figsize=(6.5, 5.5))
    ax.imshow(img, origin="lower", aspect="auto",
              extent=(*grid.spec.x_range, *grid.spec.y_range),
              interpolation="nearest")
    ax.set_xlabel("X(0)")
    ax.set_ylabel("Y(0)")
    ax.set_title(title or "red: bounded, blue: blow-up")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_boundary_fit(curve: BoundaryCurve, fits, path, title: str = ""):
    fig, ax = plt.subplots(figsize=(6.5, 5))
    ax.plot(curve.x, curve.y, "o", ms=4, color="tab:red", label="boundary points")
    xf = np.linspace(curve.x[0], curve.x[-1], 400)
    styles = ["-", "--", ":"]
    for fit, style in zip(fits, styles):
        ax.plot(xf, fit.predict(xf), style, lw=1.5,
                label=f"{fit.family} (rmse {fit.rmse:.3g})")
    ax.set_xlabel("X(0)")
    ax.set_ylabel("boundary Y(0)")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_branch(branch, path, title: str = ""):
    fig, ax = plt.subplots(figsize=(6.5, 5))
    ps = np.array([p for p, _ in branch.points])
    periods = np.array([orb.period for _, orb in branch.points])
    stable = np.array([orb.stable for _, orb in branch.points])
    # draw stable/unstable segments with different styles
    for i in range(len(ps) - 1):
        style = "-" if stable[i] else "--"
        ax.plot(ps[i:i + 2], periods[i:i + 2], style, color="tab:blue", lw=1.4)
    for m in branch.folds:
        ax.axvline(m.param, color="tab:orange", lw=0.8, alpha=0.7)
        ax.annotate("LPC", (m.param, periods.max()), fontsize=8, rotation=90)
    ax.set_xlabel(branch.vary)
    ax.set_ylabel("period")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
