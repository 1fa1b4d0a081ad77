"""Figure rendering for the report paths (PNG next to each CSV)."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metaeval import CorrelationReport, DistributionReport, GridCell, SweepPoint

__all__ = [
    "plot_correlations",
    "plot_temperature_sweep",
    "plot_ab_grid",
    "plot_matrix_heatmap",
    "plot_score_distribution",
]


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_correlations(reports: Sequence[CorrelationReport], path) -> Path:
    """Grouped bar chart of correlation values per criterion/coefficient/level."""
    labels = [f"{r.criterion}\n{r.coefficient}/{r.level}" for r in reports]
    values = [r.value for r in reports]
    fig, ax = plt.subplots(figsize=(max(6, 0.9 * len(reports)), 4))
    ax.bar(range(len(reports)), values, color="tab:blue")
    ax.set_xticks(range(len(reports)))
    ax.set_xticklabels(labels, fontsize=7)
    ax.set_ylabel("correlation")
    ax.set_ylim(-1.05, 1.05)
    ax.axhline(0.0, color="black", linewidth=0.8)
    return _save(fig, path)


def plot_temperature_sweep(points: Sequence[SweepPoint], path) -> Path:
    """Correlation vs temperature, one line per coefficient."""
    fig, ax = plt.subplots(figsize=(6, 4))
    kinds = sorted({p.coefficient for p in points})
    for kind in kinds:
        xs = [p.temperature for p in points if p.coefficient == kind and p.value is not None]
        ys = [p.value for p in points if p.coefficient == kind and p.value is not None]
        ax.plot(xs, ys, marker="o", label=kind)
    ax.set_xlabel("temperature")
    ax.set_ylabel("system-level correlation")
    ax.set_xscale("log")
    ax.legend()
    return _save(fig, path)


def plot_ab_grid(grid: Sequence[Sequence[GridCell]], path) -> Path:
    """Heatmap of system-level correlation over the (alpha, beta) grid."""
    alphas = [row[0].alpha for row in grid]
    betas = [cell.beta for cell in grid[0]]
    values = np.array(
        [[np.nan if cell.value is None else cell.value for cell in row] for row in grid]
    )
    fig, ax = plt.subplots(figsize=(6, 5))
    image = ax.imshow(values, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(betas)))
    ax.set_xticklabels([f"{b:g}" for b in betas])
    ax.set_yticks(range(len(alphas)))
    ax.set_yticklabels([f"{a:g}" for a in alphas])
    ax.set_xlabel("beta")
    ax.set_ylabel("alpha")
    fig.colorbar(image, ax=ax, label="correlation")
    return _save(fig, path)


def plot_matrix_heatmap(
    names: Sequence[str], values: np.ndarray, path, label: str = "correlation"
) -> Path:
    """Annotated square heatmap (metric-vs-metric correlations, p-values)."""
    fig, ax = plt.subplots(figsize=(1.0 + 0.8 * len(names),) * 2)
    image = ax.imshow(values, cmap="viridis")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names, fontsize=8)
    for i in range(len(names)):
        for j in range(len(names)):
            ax.text(
                j, i, f"{values[i, j]:.2f}",
                ha="center", va="center", color="white", fontsize=7,
            )
    fig.colorbar(image, ax=ax, label=label)
    return _save(fig, path)


def plot_score_distribution(
    reports: Mapping[str, DistributionReport], path
) -> Path:
    """Step histograms of rescaled scores, split by the human threshold."""
    count = len(reports)
    fig, axes = plt.subplots(1, count, figsize=(4 * count, 3.5), squeeze=False)
    for ax, (name, report) in zip(axes[0], reports.items()):
        centers = 0.5 * (report.bin_edges[:-1] + report.bin_edges[1:])
        width = report.bin_edges[1] - report.bin_edges[0]
        ax.bar(centers, report.low_counts, width=width, alpha=0.6,
               label=f"human < {report.threshold:g}")
        ax.bar(centers, report.high_counts, width=width, alpha=0.6,
               label=f"human >= {report.threshold:g}")
        ax.set_title(f"{name}\nseparation={report.separation:.3f}", fontsize=9)
        ax.set_xlabel("rescaled score")
        ax.legend(fontsize=7)
    return _save(fig, path)
