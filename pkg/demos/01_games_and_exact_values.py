"""Coalitional games and their exact allocation values.

Walks through the built-in game constructions, exact Shapley vectors,
per-player maxima, and the max-to-mean ratio that governs how many
permutation samples the protocols need.
"""

import numpy as np

from shapsim import (
    Hypergraph,
    is_supermodular,
    make_collab_game,
    make_lb_game,
    make_max_gamma_game,
    make_pair_game,
    make_synergy_game,
    marginal_contribution,
    rank_expectation,
    shapley_exact,
    shapley_via_permutations,
)

np.set_printoptions(precision=4, suppress=True)

# A triangle where every edge pays 1 when both endpoints have joined.
triangle = make_synergy_game(Hypergraph(n=3, edges=(
    (frozenset({0, 1}), 1.0), (frozenset({1, 2}), 1.0), (frozenset({0, 2}), 1.0))))
report = shapley_exact(triangle)
print("triangle synergy game")
print("  phi        =", report.phi)
print("  against n! enumeration:", shapley_via_permutations(triangle))
print("  joining {1,2} pays player 0:", marginal_contribution(triangle, 0, {1, 2}))
print("  expected reward by rank:",
      [rank_expectation(triangle, 0, j) for j in (1, 2, 3)])
print("  supermodular:", is_supermodular(triangle))

# Two players split a reward of 2; everyone else is a bystander.
pair = make_pair_game(5)
report = shapley_exact(pair)
print("\npair game, n=5")
print("  phi =", report.phi, " gamma =", report.gamma)

# The monotone game with the largest possible max-to-mean ratio.
for n in (3, 5, 7):
    report = shapley_exact(make_max_gamma_game(n))
    print(f"\npivot game n={n}: gamma = {report.gamma:.0f} "
          f"(cap n*C(n-1,floor((n-1)/2)))")

# The synthetic core-half game used by the sampling-complexity experiments.
lb = make_lb_game(10)
report = shapley_exact(lb)
print("\ncore-half game, n=10")
print("  alpha =", lb.extras["alpha"])
print("  phi   =", report.phi)
print("  exhaustive gamma =", report.gamma,
      " honest-player ratio =", report.gamma_per_player[0],
      " conventional parameter =", lb.protocol_gamma)

# The collaboration-network reconstruction (see data/collab_reconstruction.hg).
collab = make_collab_game(50)
report = shapley_exact(collab)
print("\ncollaboration reconstruction, padded to n=50")
print(f"  honest author: degree {report.u_max[0]:.0f}, phi {report.phi[0]:.4f}, "
      f"ratio {report.gamma_per_player[0]:.5f} (= 60/19)")
