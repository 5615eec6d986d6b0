"""How grid scale changes the networked-vs-independent comparison.

On a small grid the location-gated anti-coordination games are easy to
explore: independent agents find the targets on their own, and their
policy diversity spreads them across the targets, while score-weighted
adoption makes the networked population herd onto collapsed
stay-policies early, freezing it in place. Enlarging the grid makes the
targets four times sparser, which hits the independent learners hard
(watch their final return drop) while the networked population's
selection mechanism is limited by the same early freeze; with bigger
populations and more iterations the balance keeps shifting.

Heavy: the full-size runs take on the order of ten minutes of CPU each.
Pass --small-only to skip them.
"""

import dataclasses
import sys
import time

from gridmfc.env import Game
from gridmfc.orchestrator import Architecture, ExperimentConfig, desk_config, run_training


def tail_mean(rows, window=10):
    return sum(r.v_pop_hat for r in rows[-window:]) / window


def compare(label, base):
    results = {}
    for arch in (Architecture.INDEPENDENT, Architecture.NETWORKED):
        config = dataclasses.replace(base, architecture=arch)
        started = time.perf_counter()
        rows, _ = run_training(config)
        results[arch.value] = tail_mean(rows)
        print(
            f"{label:28s} {arch.value:12s} final return {results[arch.value]:6.3f} "
            f"({time.perf_counter() - started:5.0f}s)",
            flush=True,
        )
    lead = "networked" if results["networked"] > results["independent"] else "independent"
    print(f"{label:28s} -> {lead} ahead\n")


small = dataclasses.replace(desk_config(), game=Game.TARGET_COVERAGE, seed=0)
compare("10x10, 50 agents (dense)", small)

if "--small-only" not in sys.argv:
    big = ExperimentConfig(
        height=20,
        width=20,
        n_agents=100,
        game=Game.TARGET_COVERAGE,
        iterations=50,
        hidden_width=256,
        seed=0,
    )
    compare("20x20, 100 agents (sparse)", big)
