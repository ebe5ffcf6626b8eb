import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netcournot.analysis import (
    find_saturated_cut,
    flow_report,
    group_connectivity,
    price_groups,
    residual_reachable,
    verify_theorem2,
)
from netcournot.game import make_game
from netcournot.instances import random_game
from netcournot.network import MarketGraph
from netcournot.solver import Equilibrium, PreconditionError, solve_potential


def test_price_groups_examples():
    rep = price_groups([72.0, 72.0, 68.0], 1e-3)
    assert rep.groups == [[0, 1], [2]]
    assert rep.group_prices == [72.0, 68.0]
    assert rep.mean_price == pytest.approx(212.0 / 3)

    rep = price_groups([84.0, 100.0], 1e-4)
    assert rep.groups == [[1], [0]]
    assert rep.mean_price == 92.0

    assert price_groups([5.0] * 4, 1e-6).groups == [[0, 1, 2, 3]]
    with pytest.raises(ValueError):
        price_groups([1.0], 0.0)


def test_price_groups_chain_within_tolerance():
    # single linkage: 10.0 ~ 10.00008 ~ 10.00016 though the ends differ by more than tol
    rep = price_groups([10.0, 10.00008, 10.00016, 9.0], 1e-4)
    assert rep.groups == [[0, 1, 2], [3]]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from([48.0, 49.7, 62.4, 64.0, 68.0, 72.0]), min_size=1, max_size=12), st.randoms())
def test_price_groups_permutation_equivariant(prices, rnd):
    p = np.array(prices)
    perm = list(range(p.size))
    rnd.shuffle(perm)
    base = price_groups(p, 1e-3)
    moved = price_groups(p[perm], 1e-3)
    # market perm[k] of the original sits at position k after relabeling
    relabeled = [sorted(perm[k] for k in g) for g in moved.groups]
    assert relabeled == base.groups
    assert moved.group_prices == pytest.approx(base.group_prices)


def test_residual_reachable_examples():
    g = MarketGraph.from_lines(2, [(0, 1, 500.0)])
    assert residual_reachable(g, [500.0], {0}, 1e-6) == {0}
    assert residual_reachable(g, [500.0], {1}, 1e-6) == {0, 1}
    ring = MarketGraph.from_lines(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)])
    assert residual_reachable(ring, np.zeros(4), {2}, 1e-6) == {0, 1, 2, 3}


def test_find_saturated_cut_examples(congested, uncongested):
    cert = find_saturated_cut(congested.graph, [500.0], 0, 1, 1e-6)
    assert cert is not None
    assert cert.U == frozenset({0})
    assert len(cert.crossing) == 1 and cert.crossing[0].outward and cert.crossing[0].saturated
    assert cert.is_valid(1e-6)

    assert find_saturated_cut(uncongested.graph, [750.0], 0, 1, 1e-6) is None
    with pytest.raises(PreconditionError):
        find_saturated_cut(congested.graph, [500.0], 1, 1, 1e-6)


def test_verify_theorem2_examples(congested, uncongested):
    rep = verify_theorem2(congested, solve_potential(congested))
    assert rep.passed
    assert [(p.h, p.j) for p in rep.pairs] == [(0, 1)]
    assert rep.prices.mean_price == pytest.approx(92.0)

    rep = verify_theorem2(uncongested, solve_potential(uncongested))
    assert rep.passed and rep.pairs == []


def test_verify_theorem2_requires_equilibrium(congested):
    fake = Equilibrium(
        q=np.array([1400.0]), f=np.array([400.0]), d=np.array([1000.0, 400.0]),
        p=np.array([80.0, 104.0]), potential=None, iterations=0, converged=True, residual=0.0,
    )
    with pytest.raises(PreconditionError):
        verify_theorem2(congested, fake)


def test_flow_report_examples(congested, uncongested):
    (rec,) = flow_report(congested, solve_potential(congested))
    assert rec.utilization == 1.0 and rec.saturated and rec.direction == 1
    assert (rec.source, rec.target) == (0, 1)

    (rec,) = flow_report(uncongested, solve_potential(uncongested))
    assert rec.utilization == pytest.approx(0.75) and not rec.saturated

    idle = make_game(2, [(0, 1, 100.0), (0, 1, 0.0)], [0, 1])
    eq = solve_potential(idle)
    recs = flow_report(idle, eq, 1e-6)
    assert recs[0].utilization == pytest.approx(0.0, abs=1e-9)
    assert recs[1].degenerate and recs[1].saturated and recs[1].utilization == 0.0


def test_reversed_flow_direction():
    # line stored as 1 -> 0 while energy leaves the producing market 0
    game = make_game(2, [(1, 0, 200.0)], [0])
    (rec,) = flow_report(game, solve_potential(game))
    assert rec.direction == -1
    assert (rec.source, rec.target) == (0, 1)


def test_cut_certificates_on_random_instances(rng):
    for _ in range(60):
        game = random_game(rng)
        eq = solve_potential(game)
        sat_tol = 1e-6
        rep = verify_theorem2(game, eq, 1e-4, sat_tol, 1e-6)
        assert rep.passed and rep.strict_passed
        for pair in rep.strict_pairs:
            assert pair.certificate.is_valid(sat_tol)
        # closure is closed: nothing leaves it with spare outward room
        U = residual_reachable(game.graph, eq.f, {0}, sat_tol)
        c = game.graph.capacities
        for k, (a, b, _) in enumerate(game.graph.lines):
            if a in U and b not in U:
                assert c[k] - eq.f[k] <= sat_tol
            if b in U and a not in U:
                assert c[k] + eq.f[k] <= sat_tol


def test_group_connectivity():
    g = MarketGraph.from_lines(3, [(0, 1, 1.0), (1, 2, 1.0)])
    rep = price_groups([5.0, 3.0, 5.0], 1e-6)
    assert group_connectivity(g, rep) == [False, True]
