"""A complete (small) training run under each architecture.

Shrinks the desk preset so the whole script finishes in well under a
minute, then compares the three architectures on the cluster game. For the
real experiment scale, run the command-line tool instead, e.g.:

    gridmfc --preset desk --game cluster --arch networked independent central \
        --seeds 3 --output-dir runs/demo
"""

import dataclasses
import time

from gridmfc.env import Game
from gridmfc.orchestrator import Architecture, desk_config, run_training

base = dataclasses.replace(
    desk_config(),
    n_agents=20,
    iterations=15,
    game=Game.CLUSTER,
)

for architecture in Architecture:
    config = dataclasses.replace(base, architecture=architecture)
    started = time.perf_counter()
    rows, params = run_training(config)
    elapsed = time.perf_counter() - started
    first = sum(r.v_pop_hat for r in rows[:3]) / 3
    last = sum(r.v_pop_hat for r in rows[-3:]) / 3
    print(
        f"{architecture.value:12s} return {first:5.2f} -> {last:5.2f} "
        f"(clock {rows[-1].t:4d} steps, {elapsed:4.1f}s, "
        f"params stacked {params.w1.shape})"
    )
