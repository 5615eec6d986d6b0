"""Score-weighted policy adoption and max-consensus.

Each agent carries a packet (score, payload). With a tiny adoption
temperature, repeated broadcast rounds over a connected graph make the
whole population converge on the best packet within diameter-many rounds;
with a warmer temperature, adoption is probabilistic and diversity
survives longer.
"""

import numpy as np

from gridmfc.exchange import adoption_indices, adoption_probabilities
from gridmfc.netgraph import CommGraph, diameter

rng = np.random.default_rng(1)
n = 8

# A ring: diameter n // 2.
adjacency = np.zeros((n, n), dtype=bool)
for i in range(n):
    adjacency[i, (i + 1) % n] = adjacency[(i + 1) % n, i] = True
graph = CommGraph(adjacency)
print(f"ring of {n} agents, diameter {diameter(graph)}")

scores = np.round(rng.random(n), 3)
print("scores:", scores, "-> best is agent", int(np.argmax(scores)))
print("adoption probabilities seen by agent 0 (candidates 0, 1, 7):")
for tau in (1e-18, 0.1, 1.0):
    candidates = np.array([0, 1, 7])
    print(f"  tau={tau:<6g}", np.round(adoption_probabilities(scores[candidates], tau), 3))

for tau in (1e-18, 0.5):
    holdings = np.arange(n)
    sigmas = scores.copy()
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(42).spawn(n)]
    for round_no in range(int(diameter(graph))):
        chosen = adoption_indices(sigmas, graph, tau, streams)
        holdings, sigmas = holdings[chosen], sigmas[chosen]
        print(f"tau={tau:<6g} round {round_no + 1}: holdings {holdings}")
    print()
