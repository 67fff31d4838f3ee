"""Figures written next to the command-line outputs (Agg backend, PNG)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.dpi": 100,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
}
LEVEL_SPACING = 1 / 64


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    # no timestamp or version metadata so reruns give identical files
    fig.savefig(path, dpi=150, metadata={"Software": None})
    plt.close(fig)
    return path


def _labels(k: int) -> list[str]:
    return [f"Q{i + 1}{j + 1}" for i in range(k) for j in range(k)]


def plot_fluid(times, q, path: Path, title: str = "fluid limit") -> Path:
    k = q.shape[1]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 4))
        for lab, col in zip(_labels(k), q.reshape(len(times), -1).T):
            ax.plot(times, col, label=lab)
        ax.set_xlabel("t")
        ax.set_ylabel("pair mass")
        ax.set_title(title)
        ax.legend(ncol=min(k, 3))
        return _save(fig, path)


def plot_trajectory(times, states, n, fluid_t, fluid_q, path: Path) -> Path:
    k = states.shape[1]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 4))
        t = np.concatenate([[0.0], times])
        s = np.concatenate([np.zeros((1, k, k)), states]).reshape(len(t), -1) / n
        for c, lab in enumerate(_labels(k)):
            line, = ax.step(t, s[:, c], where="post", label=f"{lab} / n")
            ax.plot(fluid_t, fluid_q.reshape(len(fluid_t), -1)[:, c], "--", color=line.get_color(), lw=1)
        ax.set_xlabel("t")
        ax.set_ylabel("pairs / n")
        ax.set_title(f"sample path, n = {n} (dashed: fluid limit)")
        ax.legend(ncol=min(k, 3))
        return _save(fig, path)


def plot_converge(n_list, errors, path: Path) -> Path:
    """``errors`` has shape ``(len(seeds), len(n_list))``."""
    n = np.asarray(n_list, dtype=float)
    errors = np.asarray(errors)
    med = np.median(errors, axis=0)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 4))
        for row in errors:
            ax.plot(n, row, color="0.7", lw=0.8)
        ax.plot(n, med, "o-", color="C0", label="median")
        ax.plot(n, med[0] * np.sqrt(n[0] / n), "k:", label="slope -1/2")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel("sup |Q(n)/n - Q|")
        ax.legend()
        return _save(fig, path)


def plot_covariance(cov_emp, cov_lim, path: Path, n: int, t: float) -> Path:
    cov_emp, cov_lim = np.atleast_2d(cov_emp), np.atleast_2d(cov_lim)
    lim = float(max(np.abs(cov_emp).max(), np.abs(cov_lim).max()))
    with plt.rc_context({**STYLE, "axes.grid": False}):
        fig, axes = plt.subplots(1, 3, figsize=(11, 3.6))
        for ax, mat, name in zip(axes[:2], (cov_emp, cov_lim), ("jump process", "limit V")):
            im = ax.imshow(mat, cmap="RdBu_r", vmin=-lim, vmax=lim)
            ax.set_title(f"covariance, {name}")
            fig.colorbar(im, ax=ax, shrink=0.8)
        axes[2].plot(cov_lim.ravel(), cov_emp.ravel(), "o")
        axes[2].plot([-lim, lim], [-lim, lim], "k:")
        axes[2].set_xlabel("limit")
        axes[2].set_ylabel(f"empirical (n = {n})")
        axes[2].set_title(f"t = {t:g}")
        return _save(fig, path)


def plot_level_curves(values, grid, path: Path, pi12: float) -> Path:
    """Contours of ``Q12(inf)`` over ``(pi11, pi22)``; ``grid[i, j]`` is at
    ``pi11 = values[i]``, ``pi22 = values[j]``."""
    finite = grid[np.isfinite(grid)]
    levels = np.arange(np.floor(finite.min() / LEVEL_SPACING), np.ceil(finite.max() / LEVEL_SPACING) + 1) * LEVEL_SPACING
    with plt.rc_context({**STYLE, "axes.grid": False}):
        fig, ax = plt.subplots(figsize=(5, 5))
        cs = ax.contour(values, values, grid.T, levels=levels, colors="k", linewidths=0.7)
        ax.contour(values, values, grid.T, levels=[0.25], colors="C3", linewidths=1.5)
        ax.clabel(cs, cs.levels[::4], fontsize=7)
        ax.set_xlabel("pi11")
        ax.set_ylabel("pi22")
        ax.set_title(f"Q12(inf), pi12 = {pi12:g}, spacing 1/64")
        ax.set_aspect("equal")
        return _save(fig, path)
