"""Figure rendering for CLI reports (non-interactive Agg backend)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["STYLE", "plot_profile", "plot_planar", "plot_limit", "plot_rearrangement"]

golden = (math.sqrt(5.0) - 1.0) / 2.0
width = 5.0
STYLE = {
    "figure.figsize": (width, width * golden),
    "figure.dpi": 150,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "mathtext.fontset": "stix",
}
SPECIES = (("+", "#2b8cbe"), ("-", "#e34a33"))


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_profile(profile, path, reference=None):
    """Log-log species densities; ``reference`` is an optional (r, rho) overlay."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        r = profile.r[1:]
        for s, (name, color) in enumerate(SPECIES):
            ax.loglog(r, profile.rho[s, 1:], color=color, label=rf"$\rho_{name}$")
        if reference is not None:
            rr, rho = reference
            ax.loglog(rr[1:], rho[1:], "k:", label="closed form")
        if profile.tail is not None:
            ax.axvspan(*profile.tail.window, color="0.9", zorder=0, label="tail window")
        ax.set_xlabel("$r$")
        ax.set_ylabel("density")
        ax.legend()
        return _save(fig, path)


def plot_planar(solution, path):
    """Density maps of both species on the disk."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(width, width * 0.5))
        for ax, field, (name, _) in zip(axes, solution.rho, SPECIES):
            L = field.half_width
            img = ax.imshow(np.where(field.mask, field.values, np.nan), origin="lower",
                            extent=(-L, L, -L, L), cmap="viridis")
            ax.set_title(rf"$\rho_{name}$")
            ax.set_xlabel("$x$")
            ax.grid(False)
            fig.colorbar(img, ax=ax, shrink=0.8)
        axes[0].set_ylabel("$y$")
        return _save(fig, path)


def plot_limit(rows, path):
    """Classical-limit sweep: M beta / N - 1 and profile mismatch against fugacity."""
    z = np.array([row["fugacity"] for row in rows])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for s, (name, color) in enumerate(SPECIES):
            ax.loglog(z, [row["ratio_minus_one"][s] for row in rows], "o-", color=color,
                      label=rf"$M_{name}\beta_{name}/N_{name} - 1$")
        ax.loglog(z, [row["profile_mismatch"] for row in rows], "ks--", label="profile mismatch")
        ax.set_xlabel("central fugacity")
        ax.legend()
        return _save(fig, path)


def plot_rearrangement(field, star, path):
    """Field and its symmetric decreasing rearrangement side by side."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(width, width * 0.5))
        L = field.half_width
        vmax = float(np.max(field.values[field.mask]))
        for ax, f, title in zip(axes, (field, star), ("field", "rearrangement")):
            ax.imshow(np.where(f.mask, f.values, np.nan), origin="lower",
                      extent=(-L, L, -L, L), vmin=0.0, vmax=vmax, cmap="magma")
            ax.set_title(title)
            ax.grid(False)
        return _save(fig, path)
