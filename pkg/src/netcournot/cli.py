"""Command-line driver.

Exit codes: 0 converged / checks passed, 1 input error, 2 non-convergence or
a failed equilibrium diagnosis.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .analysis import default_sat_tol, flow_report, price_groups, verify_theorem2
from .config import ConfigError, atomic_write_text, build_artifact, load_config_full, read_artifact, write_artifact
from .reports import certificates_text, flows_csv, price_groups_csv, to_dot
from .solver import PreconditionError, SolverOptions, best_response_dynamics, solve_potential, verify_equilibrium

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2


def _kkt_tol(tol: float) -> float:
    return max(1e-6, 10.0 * tol)


def cmd_solve(args) -> int:
    try:
        loaded = load_config_full(args.config)
    except ConfigError as e:
        print(f"error [{e.category}]: {e}", file=sys.stderr)
        return EXIT_INPUT
    base = loaded.options
    try:
        opts = SolverOptions(
            tol=args.tol if args.tol is not None else base.tol,
            max_iters=args.max_iters if args.max_iters is not None else base.max_iters,
            seed=args.seed if args.seed is not None else base.seed,
        )
    except ValueError as e:
        print(f"error [options]: {e}", file=sys.stderr)
        return EXIT_INPUT
    game = loaded.game
    if args.method == "potential" and not game.is_affine:
        print("error [model]: potential method needs affine prices", file=sys.stderr)
        return EXIT_INPUT

    t0 = time.perf_counter()
    if args.method == "br":
        eq = best_response_dynamics(game, opts)
    else:
        eq = solve_potential(game, opts)
    wall = time.perf_counter() - t0

    kkt = verify_equilibrium(game, eq.q, eq.f, _kkt_tol(opts.tol))
    th2 = None
    if kkt.passed:
        th2 = verify_theorem2(game, eq, args.price_tol, args.sat_tol, kkt.tol)
    art = build_artifact(loaded, eq, opts, kkt, th2, wall)
    out = Path(args.out) if args.out else Path(f"{Path(args.config).stem}-equilibrium.json")
    write_artifact(out, art)

    ids = loaded.market_ids
    status = "converged" if eq.converged else "NOT converged"
    print(f"{status} after {eq.iterations} iterations (residual {eq.residual:.3g}); artifact: {out}")
    for j, mid in enumerate(ids):
        print(f"  market {mid}: p = {eq.p[j]:.6g} EUR/MWh, d = {eq.d[j]:.6g} MWh")
    return EXIT_OK if eq.converged else EXIT_NONCONVERGED


def cmd_analyze(args) -> int:
    try:
        data, loaded, eq = read_artifact(args.artifact)
        game = loaded.game
        tol = args.tol if args.tol is not None else _kkt_tol(data["solver"]["tol"])
        sat_tol = args.sat_tol if args.sat_tol is not None else default_sat_tol(game.graph)
        report = verify_theorem2(game, eq, args.price_tol, sat_tol, tol)
        records = flow_report(game, eq, sat_tol)
    except (ConfigError, PreconditionError) as e:
        print(f"error [verification]: {e}", file=sys.stderr)
        return EXIT_INPUT

    out_dir = Path(args.out) if args.out else Path(args.artifact).parent
    stem = Path(args.artifact).stem
    ids, line_ids = loaded.market_ids, loaded.line_ids
    groups_path = out_dir / f"{stem}.price_groups.csv"
    flows_path = out_dir / f"{stem}.flows.csv"
    cert_path = out_dir / f"{stem}.certificates.txt"
    atomic_write_text(groups_path, price_groups_csv(report.prices, ids))
    atomic_write_text(flows_path, flows_csv(records, ids, line_ids))
    atomic_write_text(cert_path, certificates_text(report, eq.p, ids, line_ids))

    print(f"{len(report.prices.groups)} price groups, "
          f"{sum(r.saturated for r in records)} saturated lines, "
          f"{len(report.pairs)} certified pairs required: {'PASS' if report.passed else 'FAIL'}")
    for price, members in zip(report.prices.group_prices, report.prices.groups):
        print(f"  {price:10.4f}  {','.join(str(ids[j]) for j in members)}")
    print(f"wrote {groups_path}, {flows_path}, {cert_path}")
    return EXIT_OK if report.passed else EXIT_NONCONVERGED


def cmd_export_graph(args) -> int:
    try:
        _, loaded, eq = read_artifact(args.artifact)
        game = loaded.game
        sat_tol = args.sat_tol if args.sat_tol is not None else default_sat_tol(game.graph)
        groups = price_groups(eq.p, args.price_tol)
        records = flow_report(game, eq, sat_tol)
    except (ConfigError, PreconditionError) as e:
        print(f"error [verification]: {e}", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out) if args.out else Path(args.artifact).with_suffix(".dot")
    atomic_write_text(out, to_dot(eq.p, groups, records, loaded.market_ids))
    print(f"wrote {out} ({game.m} markets, {len(groups.groups)} price groups)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netcournot", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="compute the equilibrium of a game config")
    solve.add_argument("--config", required=True, metavar="PATH")
    solve.add_argument("--out", metavar="PATH", help="artifact path (default: <config>-equilibrium.json)")
    solve.add_argument("--method", choices=("potential", "br"), default="potential")
    solve.add_argument("--tol", type=float)
    solve.add_argument("--max-iters", type=int)
    solve.add_argument("--seed", type=int)
    solve.add_argument("--price-tol", type=float, default=1e-4)
    solve.add_argument("--sat-tol", type=float)
    solve.set_defaults(func=cmd_solve)

    analyze = sub.add_parser("analyze", help="price groups, flow table and saturated-cut certificates")
    analyze.add_argument("artifact", metavar="ARTIFACT")
    analyze.add_argument("--out", metavar="DIR", help="output directory (default: next to the artifact)")
    analyze.add_argument("--tol", type=float, help="KKT tolerance (default: max(1e-6, 10 x solver tol))")
    analyze.add_argument("--price-tol", type=float, default=1e-4)
    analyze.add_argument("--sat-tol", type=float)
    analyze.set_defaults(func=cmd_analyze)

    export = sub.add_parser("export-graph", help="DOT graph colored by price group")
    export.add_argument("artifact", metavar="ARTIFACT")
    export.add_argument("--out", metavar="PATH", help="DOT path (default: artifact with .dot suffix)")
    export.add_argument("--price-tol", type=float, default=1e-4)
    export.add_argument("--sat-tol", type=float)
    export.set_defaults(func=cmd_export_graph)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
