"""Price differences are always explained by saturated lines.

Whenever a cheap market sits below the mean price and an expensive one sits
above it, some set of markets around the cheap one is fenced in by lines
running at full capacity out of it. The search for that set is a residual
graph walk, as in max-flow. This script prints one such certificate and then
counts certificates over a batch of random congested games.
"""

import numpy as np

from netcournot import solve_potential
from netcournot.analysis import verify_theorem2
from netcournot.game import make_game
from netcournot.instances import random_game


def show_chain():
    # a four-market chain: cheap supply on the left, richer markets on the right
    game = make_game(4, [(0, 1, 300.0), (1, 2, 150.0), (2, 3, 400.0)], [0, 0, 1, 3],
                     alpha=[100.0, 110.0, 130.0, 140.0])
    eq = solve_potential(game)
    rep = verify_theorem2(game, eq)
    print("prices:", np.round(eq.p, 3))
    print("flows: ", np.round(eq.f, 3))
    for pair in rep.pairs[:1]:
        cert = pair.certificate
        print(f"market {pair.h} is cheaper than market {pair.j}; cut U = {sorted(cert.U)}")
        for line in cert.crossing:
            print(f"  line {line.line}: {line.tail}->{line.head} carries {line.flow:.2f} of {line.capacity:.0f}")


def sweep(count=200, seed=5):
    rng = np.random.default_rng(seed)
    multi = pairs = failures = 0
    for _ in range(count):
        game = random_game(rng)
        rep = verify_theorem2(game, solve_potential(game))
        multi += len(rep.prices.groups) > 1
        pairs += len(rep.pairs)
        failures += len(rep.violations)
    print(f"{count} random games: {multi} with several price groups, "
          f"{pairs} cheap/expensive pairs, {failures} without a saturated cut")


if __name__ == "__main__":
    show_chain()
    sweep()
