"""Residual-map figure grids (PNG)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def residual_grid(rows: dict[str, list[np.ndarray]], col_titles: list[str], path, title: str = ""):
    """One row per label, one column per map; values shown unnormalized with a colorbar each."""
    labels = list(rows)
    ncol = max(len(v) for v in rows.values())
    fig, axes = plt.subplots(len(labels), ncol, figsize=(3.2 * ncol, 2.4 * len(labels)), squeeze=False)
    for r, label in enumerate(labels):
        for c in range(ncol):
            ax = axes[r][c]
            ax.set_xticks([])
            ax.set_yticks([])
            if c >= len(rows[label]):
                ax.axis("off")
                continue
            img = np.asarray(rows[label][c]).squeeze()
            im = ax.imshow(img, cmap="coolwarm")
            fig.colorbar(im, ax=ax, fraction=0.046, pad=0.02)
            if r == 0 and c < len(col_titles):
                ax.set_title(col_titles[c], fontsize=9)
            if c == 0:
                ax.set_ylabel(label, fontsize=9)
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=80)
    plt.close(fig)
    return path
