"""Two markets, one line, one producer.

A producer sits in market 0 and a line of capacity c links it to market 1,
which has no local supply. With a generous line the market maker equalizes
prices; once the line binds, market 1 pays a premium and the producer
expands output less than it would on an unconstrained network.
"""

import numpy as np

from netcournot import solve_potential, verify_equilibrium
from netcournot.instances import two_markets


def main():
    print(f"{'capacity':>9} {'q':>9} {'f':>8} {'p0':>7} {'p1':>7}  KKT")
    for c in (0.0, 250.0, 500.0, 750.0, 1000.0):
        game = two_markets(c)
        eq = solve_potential(game)
        kkt = verify_equilibrium(game, eq.q, eq.f)
        print(f"{c:9.0f} {eq.q[0]:9.2f} {eq.f[0]:8.2f} {eq.p[0]:7.2f} {eq.p[1]:7.2f}  {kkt.max_residual:.1e}")

    # beyond 750 MW the line stops binding and nothing changes
    eq = solve_potential(two_markets(1000.0))
    assert np.allclose(eq.p, 90.0)


if __name__ == "__main__":
    main()
