"""Matplotlib figure rendering for the report commands.

Figures are written next to the CSV output of each command.  The Agg
backend is forced so rendering works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import ConvergenceRecord, CutSweepRecord

_MARKERS = ["o", "s", "^", "d", "v"]


def convergence_figure(records: list[ConvergenceRecord], path) -> None:
    """Log-log error vs h with reference slopes per order."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    orders = sorted({r.p for r in records})
    for idx, p in enumerate(orders):
        rows = [r for r in records if r.p == p and np.isfinite(r.l2_error)]
        if not rows:
            continue
        h = np.array([r.h for r in rows])
        for ax, err, slope in ((axes[0],
                                np.array([r.l2_error for r in rows]), p + 1),
                               (axes[1],
                                np.array([r.h1_error for r in rows]), p)):
            ax.loglog(h, err, _MARKERS[idx % len(_MARKERS)] + "-",
                      label=f"p={p}")
            ref = err[-1] * (h / h[-1]) ** slope
            ax.loglog(h, ref, "k--", linewidth=0.7)
    scen = records[0].scenario if records else ""
    axes[0].set_ylabel("L2 error")
    axes[1].set_ylabel("H1-semi error")
    for ax in axes:
        ax.set_xlabel("h")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
    fig.suptitle(f"convergence: {scen}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _interface_axis(fracs: np.ndarray) -> np.ndarray:
    """Stretched cut-fraction axis log10(x) - log10(1 - x), which spreads
    both the x -> 0 and x -> 1 limits."""
    return np.log10(fracs) - np.log10(1.0 - fracs)


def cutsweep_figure(records: list[CutSweepRecord], path) -> None:
    """Condition numbers and CFL constant against the cut fraction."""
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    problems = sorted({r.problem for r in records})
    for idx, problem in enumerate(problems):
        rows = [r for r in records if r.problem == problem]
        rows.sort(key=lambda r: r.fraction)
        fr = np.array([r.fraction for r in rows])
        if problem == "interface":
            x = _interface_axis(fr)
            xlabel = "log10(hcut/h) - log10(1 - hcut/h)"
        else:
            x = np.log10(fr)
            xlabel = "log10(hcut/h)"
        mark = _MARKERS[idx % len(_MARKERS)]
        series = [
            (axes[0], [r.cond_mass for r in rows], "cond(M)", "log"),
            (axes[1], [r.cond_stiffness for r in rows], "cond(A)", "log"),
            (axes[2], [r.cfl for r in rows], "CFL constant", "linear"),
        ]
        for ax, ys, label, yscale in series:
            ax.plot(x, ys, mark + "-", label=problem)
            ax.set_yscale(yscale)
            ax.set_ylabel(label)
            ax.set_xlabel(xlabel)
            ax.grid(True, alpha=0.3)
    for ax in axes:
        ax.legend()
    p = records[0].p if records else "?"
    fig.suptitle(f"small-cut robustness, p={p}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def snapshot_figure(origin, spacing, values: np.ndarray, t: float,
                    path) -> None:
    """Render one sampled |u| field; NaN (outside) cells are blanked."""
    ny, nx = values.shape
    extent = (origin[0], origin[0] + spacing[0] * (nx - 1),
              origin[1], origin[1] + spacing[1] * (ny - 1))
    fig, ax = plt.subplots(figsize=(5, 4.2))
    masked = np.ma.masked_invalid(values)
    im = ax.imshow(masked, origin="lower", extent=extent, cmap="RdBu_r")
    fig.colorbar(im, ax=ax, label="|u|")
    ax.set_title(f"t = {t:.3f}")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
