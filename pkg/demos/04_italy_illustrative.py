"""An illustrative 22-zone network in the shape of the Italian grid.

Every zone uses the same demand curve and every producer the same cost, so
all price differences come from the network. The capacities are made up for
demonstration and do not reproduce any published figures.
"""

from netcournot import solve_potential
from netcournot.analysis import flow_report, verify_theorem2
from netcournot.config import load_config_full


def main():
    cfg = load_config_full("examples/italy-illustrative.json")
    game = cfg.game
    eq = solve_potential(game, cfg.options)
    rep = verify_theorem2(game, eq)
    print(f"{game.m} zones, {game.l} lines, {game.n} producers; "
          f"converged in {eq.iterations} iterations")
    for price, members in zip(rep.prices.group_prices, rep.prices.groups):
        names = ", ".join(str(cfg.market_ids[j]) for j in members)
        print(f"  {price:7.2f} EUR/MWh  zones {names}")
    saturated = [r for r in flow_report(game, eq) if r.saturated]
    print(f"{len(saturated)} saturated lines; {len(rep.pairs)} price gaps certified, "
          f"{len(rep.violations)} unexplained")


if __name__ == "__main__":
    main()
