"""Aggregation of metrics CSVs into per-curve means and error bands.

Input files follow the training sweep schema: columns ``game,
architecture, radius, seed, k, t, v_pop_hat, wall_ms``. Rows are grouped
by (game, architecture, radius); seeds within a group become repeated
measurements of the same learning curve, summarised as the per-iteration
mean and the standard deviation of the mean (sample std over seeds divided
by sqrt(number of seeds)).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = ["CurveGroup", "aggregate"]

Key = tuple[str, str, float]


@dataclass(frozen=True)
class CurveGroup:
    """One plotted curve: a (game, architecture, radius) key with its band."""

    key: Key
    k: np.ndarray
    mean: np.ndarray
    sem: np.ndarray
    n_seeds: int

    @classmethod
    def from_seed_series(cls, series: Sequence[Sequence[float]], key: Key) -> "CurveGroup":
        """Build a group from per-seed value sequences aligned on k."""
        lengths = {len(s) for s in series}
        if len(lengths) != 1:
            raise ValueError(f"seeds disagree on iteration count for {key}: {sorted(lengths)}")
        values = np.asarray(series, dtype=float)
        n_seeds = values.shape[0]
        mean = values.mean(axis=0)
        if n_seeds == 1:
            sem = np.zeros_like(mean)
        else:
            sem = values.std(axis=0, ddof=1) / np.sqrt(n_seeds)
        return cls(key=key, k=np.arange(values.shape[1]), mean=mean, sem=sem, n_seeds=n_seeds)


def _read_rows(path: Path) -> Iterable[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"game", "architecture", "radius", "seed", "k", "v_pop_hat"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValueError(f"{path} does not follow the metrics CSV schema")
        yield from reader


def aggregate(paths: Sequence[Path | str]) -> dict[Key, CurveGroup]:
    """Group rows from the given CSVs and compute each curve's band.

    Seeds belonging to one key must cover identical iteration ranges;
    anything else indicates mixed sweeps and is a hard error.
    """
    per_seed: dict[Key, dict[int, dict[int, float]]] = {}
    for path in paths:
        for row in _read_rows(Path(path)):
            key = (row["game"], row["architecture"], float(row["radius"]))
            seed = int(row["seed"])
            per_seed.setdefault(key, {}).setdefault(seed, {})[int(row["k"])] = float(
                row["v_pop_hat"]
            )

    groups: dict[Key, CurveGroup] = {}
    for key, seeds in sorted(per_seed.items()):
        k_sets = {tuple(sorted(points)) for points in seeds.values()}
        if len(k_sets) != 1:
            raise ValueError(f"seeds disagree on iteration grid for {key}")
        k_values = sorted(next(iter(k_sets)))
        series = [
            [seeds[seed][k] for k in k_values] for seed in sorted(seeds)
        ]
        group = CurveGroup.from_seed_series(series, key)
        groups[key] = CurveGroup(
            key=key,
            k=np.asarray(k_values),
            mean=group.mean,
            sem=group.sem,
            n_seeds=group.n_seeds,
        )
    return groups
