"""SVG rendering of bulk heatmaps and sweep summaries.

Fields are scaled to unit maximum before colouring; the colour map is a
fixed linear ``viridis``. SVG metadata dates are suppressed and the element
id salt is pinned so that output is reproducible byte for byte.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import SweepReport  # noqa: E402
from .picard import StationarySolution  # noqa: E402

COLORMAP = "viridis"

__all__ = ["COLORMAP", "normalized", "heatmap_rgba", "plot_heatmap", "plot_profile", "plot_sweep_summary"]


def normalized(u: np.ndarray) -> np.ndarray:
    top = np.abs(u).max()
    return u / top if top > 0 else np.zeros_like(u)


def heatmap_rgba(u1: np.ndarray) -> np.ndarray:
    """RGBA pixels of the normalised field, rows indexed by x2 (bottom first)."""
    cmap = plt.get_cmap(COLORMAP)
    return cmap(np.clip(normalized(u1), 0.0, 1.0).T)


def _save(fig, path: Path) -> None:
    with plt.rc_context({"svg.hashsalt": "morphogen", "svg.fonttype": "path"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_heatmap(sol: StationarySolution, path: str | Path, title: str | None = None) -> Path:
    path = Path(path)
    g = sol.grid2
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.imshow(
        heatmap_rgba(sol.u1),
        origin="lower",
        extent=(-1 - g.dx1 / 2, 1 + g.dx1 / 2, -g.dx2 / 2, 1 + g.dx2 / 2),
        aspect="auto",
        interpolation="nearest",
    )
    sm = plt.cm.ScalarMappable(cmap=COLORMAP, norm=plt.Normalize(0, 1))
    fig.colorbar(sm, ax=ax, label="u1 / max u1")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_title(title if title is not None else f"h = {sol.params.h:.4g}")
    fig.tight_layout()
    _save(fig, path)
    return path


def plot_profile(sol: StationarySolution, path: str | Path) -> Path:
    """Normalised edge profiles of u1 (trace) and u2."""
    path = Path(path)
    x = sol.grid1.x
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.plot(x, normalized(sol.trace), label="u1 (edge)")
    ax.plot(x, normalized(sol.u2), label="u2")
    ax.set_xlabel("x1")
    ax.set_ylabel("normalised concentration")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
    return path


def plot_sweep_summary(report: SweepReport, path: str | Path) -> Path:
    path = Path(path)
    h = np.array(report.h_values)
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.loglog(h, [r.homogeneity for r in report.rows], "o-", label="homogeneity index")
    ax.loglog(h, [r.distance for r in report.rows], "s-", label="distance to 1D")
    ax.set_xlabel("h")
    ax.invert_xaxis()
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
    return path
