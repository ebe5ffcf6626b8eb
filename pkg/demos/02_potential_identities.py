"""The potential tracks every player's incentives exactly.

For a unilateral change of one producer's output, the potential moves by the
same amount as that producer's profit. For a change of the line flows, it
moves by the same amount as the market maker's welfare objective. This script
samples random games and points and prints the largest mismatch it sees.
"""

import numpy as np

from netcournot import marshallian_welfare, potential, producer_utility
from netcournot.game import strategy_bounds
from netcournot.instances import random_game
from netcournot.solver import random_feasible_point


def main(samples=500, seed=1):
    rng = np.random.default_rng(seed)
    producer_gap = flow_gap = 0.0
    for _ in range(samples):
        game = random_game(rng)
        q, f = random_feasible_point(game, rng)
        _, f2 = random_feasible_point(game, rng)
        dw = marshallian_welfare(game, q, f2) - marshallian_welfare(game, q, f)
        dphi = potential(game, q, f2) - potential(game, q, f)
        flow_gap = max(flow_gap, abs(dphi - dw) / (1 + abs(dw)))
        if game.n:
            i = int(rng.integers(game.n))
            q2 = q.copy()
            q2[i] = rng.uniform(0, strategy_bounds(game)[i])
            du = producer_utility(game, i, q2, f) - producer_utility(game, i, q, f)
            dphi = potential(game, q2, f) - potential(game, q, f)
            producer_gap = max(producer_gap, abs(dphi - du) / (1 + abs(du)))
    print(f"{samples} random games")
    print(f"  producer deviations: max |dPhi - du| / (1 + |du|) = {producer_gap:.2e}")
    print(f"  flow deviations:     max |dPhi - dw| / (1 + |dw|) = {flow_gap:.2e}")


if __name__ == "__main__":
    main()
