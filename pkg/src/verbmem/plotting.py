"""Report figures for the bench commands, written next to their CSV output."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GOLDEN = (math.sqrt(5) - 1.0) / 2.0


def publication_settings(font_size: int = 10) -> None:
    plt.rcParams.update({
        "font.size": font_size,
        "axes.labelsize": font_size,
        "axes.titlesize": font_size + 1,
        "xtick.labelsize": font_size - 1,
        "ytick.labelsize": font_size - 1,
        "legend.fontsize": font_size - 1,
        "axes.spines.top": False,
        "axes.spines.right": False,
        "savefig.dpi": 150,
        "savefig.bbox": "tight",
        "figure.facecolor": "w",
    })


def _figure(width: float = 6.0, height: float | None = None):
    publication_settings()
    return plt.subplots(figsize=(width, height or width * GOLDEN))


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_sweep(rows: Sequence[dict], path: str | Path, highlight: tuple[float, float, float] | None = None) -> Path:
    """Grid points sorted by AUC; undefined AUCs are left out."""
    points = [r for r in rows if isinstance(r["auc"], float)]
    points.sort(key=lambda r: r["auc"])
    fig, ax = _figure()
    x = np.arange(len(points))
    ax.plot(x, [r["auc"] for r in points], ".", color="0.3", ms=4)
    if highlight is not None:
        for i, r in enumerate(points):
            if (r["lambda_n"], r["lambda_s"], r["lambda_pi"]) == highlight:
                ax.plot(i, r["auc"], "o", color="C3", ms=7, label="default weights")
        if ax.get_legend_handles_labels()[0]:
            ax.legend(frameon=False, loc="lower right")
    ax.axhline(0.5, color="0.7", lw=0.8, ls="--")
    ax.set_xlabel("grid point (sorted)")
    ax.set_ylabel("AUC")
    ax.set_ylim(0.0, 1.02)
    ax.set_title(f"Gate weight sweep ({len(points)} points)")
    return _save(fig, path)


def plot_grid(cells: Sequence[dict], path: str | Path, metric: str = "recall_at_10") -> Path:
    """Heatmap of one metric over embedders (rows) and rerankers (columns)."""
    embedders = list(dict.fromkeys(c["embedder"] for c in cells))
    rerankers = list(dict.fromkeys(c["reranker"] for c in cells))
    values = np.full((len(embedders), len(rerankers)), np.nan)
    for c in cells:
        values[embedders.index(c["embedder"]), rerankers.index(c["reranker"])] = c[metric]
    fig, ax = _figure(width=1.6 * len(rerankers) + 2.5, height=0.8 * len(embedders) + 1.5)
    image = ax.imshow(values, vmin=0.0, vmax=1.0, cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(rerankers)), rerankers)
    ax.set_yticks(range(len(embedders)), embedders)
    for (i, j), v in np.ndenumerate(values):
        if not np.isnan(v):
            ax.text(j, i, f"{v:.3f}", ha="center", va="center", color="w" if v < 0.6 else "k")
    fig.colorbar(image, ax=ax, label=metric)
    ax.set_title(f"{metric} by embedder and reranker")
    return _save(fig, path)


def plot_eval(rows: Sequence[dict], path: str | Path) -> Path:
    """Per-query reciprocal rank as a bar chart."""
    fig, ax = _figure()
    rr = [r["reciprocal_rank"] for r in rows]
    ax.bar(np.arange(len(rr)), rr, color="0.35", width=0.8)
    ax.set_xlabel("query")
    ax.set_ylabel("reciprocal rank")
    ax.set_ylim(0.0, 1.05)
    mean = sum(rr) / len(rr) if rr else 0.0
    ax.axhline(mean, color="C3", lw=1, label=f"MRR {mean:.3f}")
    ax.legend(frameon=False, loc="lower right")
    return _save(fig, path)
