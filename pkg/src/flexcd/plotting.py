"""Convergence figures rendered to image files."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _series(trace, F_star):
    k = np.concatenate(([0], trace.column("k")))
    t = np.concatenate(([trace.setup_time_s], trace.column("time_s")))
    F = np.concatenate(([trace.F0], trace.F))
    if F_star is not None:
        F = np.maximum(F - F_star, np.finfo(float).tiny)
    return k, t, F


def plot_traces(traces: dict, path_prefix, F_star: float | None = None, fmt: str = "png") -> list:
    """Draw ``F`` against iterations and against wall time for each named trace.

    With ``F_star`` the optimality gap is drawn on a log axis.  Returns the
    paths written: ``<prefix>_iters.<fmt>`` and ``<prefix>_time.<fmt>``.
    """
    paths = []
    ylabel = "F(x) - F*" if F_star is not None else "F(x)"
    for axis, suffix, xlabel in ((0, "iters", "iteration"), (1, "time", "time [s]")):
        fig, ax = plt.subplots(figsize=(6, 4))
        for name, trace in traces.items():
            k, t, F = _series(trace, F_star)
            ax.plot(k if axis == 0 else t, F, label=name, lw=1.2)
        if F_star is not None:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = f"{path_prefix}_{suffix}.{fmt}"
        fig.savefig(path, dpi=100)
        plt.close(fig)
        paths.append(path)
    return paths
