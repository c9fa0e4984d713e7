"""Self-contained SVG figures: group-food bars and rank curves with 95% CIs."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .stats import mean_ci95  # noqa: E402

_COLORS = {"mean": "#1f77b4", "minimum": "#2ca02c", "maximum": "#d62728"}
_JOINT_MODES = ("group", "centralized")


def _ci(values):
    if len(values) < 2:
        return float(np.mean(values)), 0.0
    return mean_ci95(values)


def _save(fig, path):
    plt.rcParams["svg.hashsalt"] = "forage-lab"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_group_food(runs, path) -> None:
    """Bar per condition: mean final group food with CI whiskers."""
    stats = [_ci(r.group_food) for r in runs]
    fig, ax = plt.subplots(figsize=(1.2 * len(runs) + 2, 4))
    x = np.arange(len(runs))
    colors = [_COLORS.get(r.manifest.get("scheme", ""), "gray") for r in runs]
    hatches = ["" if r.manifest.get("mode") in _JOINT_MODES else "//" for r in runs]
    bars = ax.bar(x, [m for m, _ in stats], yerr=[h for _, h in stats], capsize=4,
                  color=colors, edgecolor="black")
    for bar, hatch in zip(bars, hatches):
        bar.set_hatch(hatch)
    ax.set_xticks(x, [r.label for r in runs], rotation=30, ha="right")
    ax.set_ylabel("food collected by group")
    fig.tight_layout()
    _save(fig, path)


def plot_rank_curves(runs, path) -> None:
    """One panel per reward scheme; solid joint/clonal, dotted independent/mixed."""
    schemes = [s for s in ("mean", "minimum", "maximum")
               if any(r.manifest.get("scheme") == s for r in runs)] or ["?"]
    fig, axes = plt.subplots(1, len(schemes), figsize=(4 * len(schemes), 3.5), squeeze=False)
    ranks = np.arange(1, 5)
    for ax, scheme in zip(axes[0], schemes):
        for run in runs:
            if run.manifest.get("scheme", "?") != scheme:
                continue
            stats = [_ci(run.ranks[:, k]) for k in range(4)]
            mean = np.array([m for m, _ in stats])
            half = np.array([h for _, h in stats])
            style = "-" if run.manifest.get("mode") in _JOINT_MODES else ":"
            ax.fill_between(ranks, mean - half, mean + half, color="0.8")
            ax.plot(ranks, mean, style, color=_COLORS.get(scheme, "black"), marker="o", label=run.label)
        ax.set_title(scheme.upper())
        ax.set_xticks(ranks)
        ax.set_xlabel("rank")
        ax.legend(fontsize="x-small")
    axes[0][0].set_ylabel("food collected")
    fig.tight_layout()
    _save(fig, path)
