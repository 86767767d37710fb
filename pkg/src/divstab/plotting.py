"""Static SVG phase portraits: 2D projections of trajectory bundles."""

from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no date so repeated renders are byte-identical
RC = {"svg.hashsalt": "divstab", "svg.fonttype": "none", "path.simplify": False}


def plot_projection(
    trajectories: Mapping[int, np.ndarray],
    names: Sequence[str],
    out_path: str,
    coords: tuple[int, int] = (0, 1),
    title: str | None = None,
) -> None:
    """Each array holds rows ``(t, x1, ..., xn)``; ``coords`` index the state."""
    if not trajectories:
        raise ValueError("no trajectories to plot")
    i, j = coords
    n = len(names)
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise ValueError(f"coordinate pair {coords} invalid for {n} state variables")
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5, 5))
        for k in sorted(trajectories):
            data = trajectories[k]
            ax.plot(data[:, 1 + i], data[:, 1 + j], lw=0.8)
            ax.plot(data[0, 1 + i], data[0, 1 + j], "o", ms=2.5, color="black")
        ax.set_xlabel(names[i])
        ax.set_ylabel(names[j])
        ax.axhline(0, color="0.8", lw=0.5, zorder=0)
        ax.axvline(0, color="0.8", lw=0.5, zorder=0)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(out_path, format="svg", metadata={"Date": None})
        plt.close(fig)
