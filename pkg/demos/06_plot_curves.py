"""End to end: sweep two architectures, then render learning curves.

Uses a deliberately tiny configuration; expect the networked curve to pull
ahead of the independent one even within a handful of iterations. The
figure lands in ``runs/demo_curves/learning_curves.pdf``. Requires the
plotkit package (the figure half of this repository).
"""

import dataclasses
from pathlib import Path

from gridmfc.cli import SweepSpec, run_sweep
from gridmfc.env import Game
from gridmfc.orchestrator import Architecture, desk_config

try:
    from plotkit import aggregate, render
except ImportError as error:
    raise SystemExit("install the plotkit package first: pip install -e plotkit/") from error

out = Path("runs/demo_curves")
base = dataclasses.replace(desk_config(), n_agents=20, iterations=15)
spec = SweepSpec(
    base=base,
    architectures=(Architecture.NETWORKED, Architecture.INDEPENDENT),
    radii=(1.0,),
    games=(Game.CLUSTER, Game.DISPERSE),
    seeds=(0, 1),
    output_dir=out,
)
run_sweep(spec)

groups = aggregate([out / "metrics.csv"])
render(groups, out / "learning_curves.pdf")
print(f"wrote {out / 'learning_curves.pdf'} with {len(groups)} curves")
