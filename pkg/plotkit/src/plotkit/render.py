"""Figure rendering: one panel per game, one colour per curve, shaded bands.

The band endpoints are exactly the aggregation's mean +- standard deviation
of the mean; no smoothing is applied. Output is vector (pdf/svg) by default
and renders headless.
"""

from __future__ import annotations

import math
import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .aggregate import CurveGroup, Key

__all__ = ["render"]


def _curve_label(architecture: str, radius: float) -> str:
    if architecture == "networked":
        return f"networked r={radius:g}"
    return architecture


def render(groups: dict[Key, CurveGroup], out_path: Path | str):
    """Write the multi-panel learning-curve figure; returns the Figure."""
    groups = {key: g for key, g in groups.items() if len(g.k)}
    if not groups:
        raise ValueError("no curves to render")
    games = sorted({key[0] for key in groups})
    columns = 2 if len(games) > 1 else 1
    rows = math.ceil(len(games) / columns)
    figure, axes = plt.subplots(
        rows, columns, figsize=(6.4 * columns, 3.6 * rows), squeeze=False
    )

    for index, game in enumerate(games):
        ax = axes[index // columns][index % columns]
        for key in sorted(k for k in groups if k[0] == game):
            group = groups[key]
            if len(group.mean) == 0:
                warnings.warn(f"empty curve for {key}, skipped")
                continue
            (line,) = ax.plot(group.k, group.mean, label=_curve_label(key[1], key[2]))
            ax.fill_between(
                group.k,
                group.mean - group.sem,
                group.mean + group.sem,
                alpha=0.25,
                color=line.get_color(),
                linewidth=0,
            )
        ax.set_title(game.replace("_", " "))
        ax.set_xlabel("iteration")
        ax.set_ylabel("population-average return")
        ax.legend(fontsize=8)
    for index in range(len(games), rows * columns):
        axes[index // columns][index % columns].axis("off")

    figure.tight_layout()
    figure.savefig(out_path)
    plt.close(figure)
    return figure
