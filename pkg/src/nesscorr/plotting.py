"""Figure rendering for the CLI report paths.

Figures are written next to the delimited output; they carry no metadata
that varies between runs.
"""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = [
    "plot_density",
    "plot_triangle",
    "plot_decay",
    "plot_estimate",
]

_SAVE_OPTS = {"dpi": 130, "metadata": {"Software": None}}


def plot_density(path, field, title="mean profile"):
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    x = np.arange(field.N + 1)
    ax.plot(x, field.values, "o-", ms=4)
    ax.set_xlabel("site")
    ax.set_ylabel("mean occupation")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def plot_triangle(path, field, title="pair field"):
    N = field.N
    grid = np.full((N + 1, N + 1), np.nan)
    for (x, y, v) in field.triangle_table():
        grid[y, x] = v
        grid[x, y] = v
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    im = ax.imshow(grid, origin="lower", cmap="RdBu_r")
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def plot_decay(path, sizes, maxima, slope, intercept, title="pair-field decay"):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.loglog(sizes, maxima, "o", label="max |phi|")
    xs = np.array(sizes, dtype=float)
    ax.loglog(xs, np.exp(intercept) * xs ** slope, "-",
              label=f"fit slope {slope:.3f}")
    ax.set_xlabel("N")
    ax.set_ylabel("max |phi|")
    ax.legend()
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def plot_estimate(path, est, reference=None, title="ensemble estimate"):
    fig, axes = plt.subplots(1, 2, figsize=(8.4, 3.4))
    sites = np.arange(1, est.spec.N)
    axes[0].errorbar(sites, est.rho_mean, yerr=3 * est.rho_se, fmt="o", ms=4,
                     label="MC (3 SE)")
    if reference is not None:
        axes[0].plot(np.arange(reference.N + 1), reference.values, "-",
                     label="solver")
    axes[0].set_xlabel("site")
    axes[0].set_ylabel("mean")
    axes[0].legend()
    off = [(x, y, m, s) for (x, y, m, s) in est.pairs if x != y]
    if off:
        idx = np.arange(len(off))
        means = [m for (_x, _y, m, _s) in off]
        errs = [3 * s for (_x, _y, _m, s) in off]
        axes[1].errorbar(idx, means, yerr=errs, fmt=".", ms=3)
        axes[1].axhline(0.0, color="k", lw=0.6)
        axes[1].set_xlabel("pair index")
        axes[1].set_ylabel("covariance")
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)
