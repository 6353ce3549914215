"""Sample-grid rendering for visual inspection of a trained generator."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .train import TrainConfig, TrainResult, generate


def save_sample_grid(
    result: TrainResult, cfg: TrainConfig, out_path: str, per_label: int = 8
) -> None:
    """One row of generated samples per conditioned label."""
    labels = result.condition_labels
    fig, axes = plt.subplots(
        len(labels), per_label, figsize=(per_label * 0.9, len(labels) * 0.9)
    )
    axes = np.atleast_2d(axes)
    for r, label in enumerate(labels):
        images = generate(result, label, per_label, cfg)
        for c in range(per_label):
            ax = axes[r][c]
            ax.imshow(images[c], cmap="gray", vmin=0, vmax=255)
            ax.set_axis_off()
        axes[r][0].set_title(f"label {label}", loc="left", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
