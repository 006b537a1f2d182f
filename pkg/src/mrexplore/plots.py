"""Matplotlib figure rendering for the CLI report paths.

Every function writes one PNG next to the delimited output it illustrates.
The Agg backend is forced so rendering works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .env import ExplorationEnv  # noqa: E402
from .gridworld import Cell, OccupancyGrid  # noqa: E402
from .harness import EpisodeResult, MetricsReport  # noqa: E402

__all__ = ["save_map_figure", "save_run_figure", "save_metrics_figure",
           "save_curve_figure", "save_bench_figure", "save_ablation_figure"]

# Unknown / free / occupied, in Cell value order.
_CMAP = matplotlib.colors.ListedColormap(["#b0b0b0", "#ffffff", "#1a1a1a"])
_ROBOT_COLORS = ["#0072b2", "#d55e00", "#009e73", "#cc79a7", "#e69f00",
                 "#56b4e9", "#f0e442", "#000000"]


def _grid_image(ax, grid: OccupancyGrid) -> None:
    img = np.zeros_like(grid.cells, dtype=int)
    img[grid.cells == Cell.FREE] = 1
    img[grid.cells == Cell.OCCUPIED] = 2
    ax.imshow(img, cmap=_CMAP, vmin=0, vmax=2, origin="lower",
              extent=(0, grid.width_m, 0, grid.height_m),
              interpolation="nearest")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")


def save_map_figure(grid: OccupancyGrid, path: str | Path,
                    title: str = "") -> None:
    """Occupancy map preview."""
    fig, ax = plt.subplots(figsize=(6, 6 * grid.height_m / max(grid.width_m, 1e-9)))
    _grid_image(ax, grid)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_run_figure(truth: OccupancyGrid, result: EpisodeResult,
                    path: str | Path, title: str = "") -> None:
    """Ground-truth map with every robot's trajectory overlaid."""
    fig, ax = plt.subplots(figsize=(7, 7 * truth.height_m / max(truth.width_m, 1e-9)))
    _grid_image(ax, truth)
    rids = sorted({r.rid for r in result.records})
    for rid in rids:
        pts = [(r.x, r.y) for r in result.records if r.rid == rid]
        if not pts:
            continue
        xs, ys = zip(*pts)
        color = _ROBOT_COLORS[rid % len(_ROBOT_COLORS)]
        ax.plot(xs, ys, "-", color=color, linewidth=1.2,
                label=f"robot {rid}")
        ax.plot(xs[0], ys[0], "o", color=color, markersize=7,
                markeredgecolor="white")
        ax.plot(xs[-1], ys[-1], "s", color=color, markersize=6,
                markeredgecolor="white")
    ax.legend(loc="upper right", fontsize=8)
    status = "success" if result.success else "budget hit"
    ax.set_title(title or f"{result.steps} steps ({status})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_metrics_figure(reports: list[MetricsReport],
                        path: str | Path) -> None:
    """Per-run steps and exploration-rate bars."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    idx = np.arange(len(reports))
    colors = ["#009e73" if r.success else "#d55e00" for r in reports]
    axes[0].bar(idx, [r.steps for r in reports], color=colors)
    axes[0].set_xlabel("run")
    axes[0].set_ylabel("decision steps")
    axes[0].set_title("steps per run (green = success)")
    axes[1].bar(idx - 0.2, [r.eta_t for r in reports], width=0.4,
                label="area / step", color="#0072b2")
    axes[1].bar(idx + 0.2, [r.eta_d for r in reports], width=0.4,
                label="area / meter", color="#cc79a7")
    axes[1].set_xlabel("run")
    axes[1].set_ylabel("m² per unit effort")
    axes[1].set_title("exploration rates")
    axes[1].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_curve_figure(curve: list[dict], path: str | Path) -> None:
    """Training progress: success rate and mean steps per window."""
    fig, ax1 = plt.subplots(figsize=(7, 4))
    xs = [row["window"] for row in curve]
    ax1.plot(xs, [row["success_rate"] for row in curve], "o-",
             color="#0072b2", label="success rate")
    ax1.set_xlabel("training window")
    ax1.set_ylabel("success rate", color="#0072b2")
    ax1.set_ylim(-0.05, 1.05)
    ax2 = ax1.twinx()
    ax2.plot(xs, [row["mean_steps"] for row in curve], "s--",
             color="#d55e00", label="mean steps")
    ax2.set_ylabel("mean steps", color="#d55e00")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_bench_figure(rows: list[dict], path: str | Path) -> None:
    """Baseline comparison: success rate and mean steps per policy."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    names = [row["policy"] for row in rows]
    idx = np.arange(len(names))
    axes[0].bar(idx, [row["success_rate"] for row in rows], color="#0072b2")
    axes[0].set_xticks(idx, names, rotation=30, ha="right")
    axes[0].set_ylim(0, 1.05)
    axes[0].set_ylabel("success rate")
    axes[1].bar(idx, [row["mean_steps"] for row in rows], color="#d55e00")
    axes[1].set_xticks(idx, names, rotation=30, ha="right")
    axes[1].set_ylabel("mean steps")
    fig.suptitle("policy comparison")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_ablation_figure(rows: list[dict], path: str | Path) -> None:
    """Surplus-signal ablation: success %, steps, distance side by side."""
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.5))
    names = [row["variant"] for row in rows]
    idx = np.arange(len(names))
    for ax, key, label in ((axes[0], "success_pct", "success [%]"),
                           (axes[1], "mean_steps", "mean steps"),
                           (axes[2], "mean_distance_m", "mean distance [m]")):
        ax.bar(idx, [row[key] for row in rows],
               color=["#0072b2", "#d55e00"][:len(rows)])
        ax.set_xticks(idx, names, rotation=15, ha="right")
        ax.set_ylabel(label)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def truth_of(env: ExplorationEnv) -> OccupancyGrid:
    """The env's ground-truth grid (for callers that only hold the env)."""
    return env.truth
