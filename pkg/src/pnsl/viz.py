"""SVG heatmaps of grid fields with a fixed color map."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .fields import GridField  # noqa: E402

__all__ = ["save_heatmap"]

_CMAP = "viridis"


def save_heatmap(fld: GridField, path: str, title: str = "",
                 vmin: float | None = None, vmax: float | None = None) -> None:
    """Render the field as an SVG heatmap (NaN nodes transparent)."""
    lo, hi = fld.grid.bounds()
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    img = ax.imshow(fld.values, origin="lower", cmap=_CMAP,
                    extent=(lo[0], hi[0], lo[1], hi[1]),
                    vmin=vmin, vmax=vmax, interpolation="nearest")
    fig.colorbar(img, ax=ax, shrink=0.85)
    if title:
        ax.set_title(title)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _finite_range(values: np.ndarray) -> tuple[float, float]:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return 0.0, 1.0
    return float(finite.min()), float(finite.max())
