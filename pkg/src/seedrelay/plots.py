"""Figure rendering for sweep tables and embedding CSVs.

Everything draws through the Agg backend and lands in a file next to the
delimited output; nothing here opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_STYLE = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
}


def render_sweep_figure(rows, out_path: str) -> None:
    """Mean uplink latency and reference label privacy against the sweep axis."""
    axis = rows[0].axis
    values = [r.value for r in rows]
    lat = [r.stats["overall_latency"][0] for r in rows]
    lat_std = [r.stats["overall_latency"][1] for r in rows]
    priv = [r.stats["ref_privacy_zerofill"][0] for r in rows]

    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 6.0))
        ax1.errorbar(values, lat, yerr=lat_std, marker="o", capsize=3, color="tab:blue")
        ax1.set_ylabel("overall latency [slots]")
        ax2.plot(values, priv, marker="s", color="tab:orange")
        ax2.set_ylabel("reference label privacy")
        ax2.set_xlabel(axis)
        ax2.set_ylim(-0.02, 1.02)
        fig.suptitle(f"sweep over {axis} ({rows[0].seeds} seeds/point)")
        fig.tight_layout()
        fig.savefig(out_path)
        plt.close(fig)


def render_mds_figure(coords: np.ndarray, labels: np.ndarray, out_path: str) -> None:
    """Scatter of the 2-D embedding, one color per class label."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        sc = ax.scatter(
            coords[:, 0], coords[:, 1], c=labels, cmap="tab10", vmin=-0.5, vmax=9.5, s=26
        )
        fig.colorbar(sc, ax=ax, ticks=range(10), label="label")
        ax.set_xlabel("dim 1")
        ax.set_ylabel("dim 2")
        ax.set_title("classical MDS embedding of delivered samples")
        fig.tight_layout()
        fig.savefig(out_path)
        plt.close(fig)
