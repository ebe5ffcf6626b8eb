import numpy as np
import pytest

from netcournot.game import (
    ConcavePrice,
    GameInstance,
    QuadraticCost,
    UnsupportedModelError,
    make_game,
    producer_strategy_bound,
)
from netcournot.instances import random_game
from netcournot.network import MarketGraph, ProducerMap, incidence_apply
from netcournot.solver import (
    PreconditionError,
    SolverOptions,
    best_response_dynamics,
    best_response_market_maker,
    best_response_producer,
    canonical_flow,
    random_feasible_point,
    solve_potential,
    verify_equilibrium,
)


# Closed forms (alpha=120, beta=0.04, theta=0.01):
#   monopoly FOC       alpha - 2(beta + theta) q = 0                 -> q = 1200
#   uncongested pair   d1 = d2 = q/2, alpha - (3beta/2 + 2theta) q = 0 -> q = 1500
#   congested pair     f = c, alpha + beta c - (2beta + 2theta) q = 0 -> q = 1400 at c = 500
def test_monopoly(monopoly):
    eq = solve_potential(monopoly)
    assert eq.converged
    np.testing.assert_allclose(eq.q, [1200.0], rtol=1e-9)
    np.testing.assert_allclose(eq.p, [72.0], rtol=1e-9)


def test_two_markets_uncongested(uncongested):
    eq = solve_potential(uncongested)
    np.testing.assert_allclose(eq.q, [1500.0], rtol=1e-9)
    np.testing.assert_allclose(eq.f, [750.0], rtol=1e-9)
    np.testing.assert_allclose(eq.d, [750.0, 750.0], rtol=1e-9)
    np.testing.assert_allclose(eq.p, [90.0, 90.0], rtol=1e-9)


def test_two_markets_congested(congested):
    eq = solve_potential(congested)
    np.testing.assert_allclose(eq.q, [1400.0], rtol=1e-9)
    assert eq.f[0] == 500.0
    np.testing.assert_allclose(eq.d, [900.0, 500.0], rtol=1e-9)
    np.testing.assert_allclose(eq.p, [84.0, 100.0], rtol=1e-9)


def test_solve_rejects_general_prices():
    price = ConcavePrice(lambda r: 100 - r, lambda r: -1.0, lambda r: 0.0, root=100.0)
    game = GameInstance(MarketGraph(1), ProducerMap((0,)), (price,), (QuadraticCost(0.0),))
    with pytest.raises(UnsupportedModelError):
        solve_potential(game)


def test_nonconvergence_returns_last_iterate(rng):
    game = random_game(np.random.default_rng(3), max_markets=6)
    eq = solve_potential(game, SolverOptions(max_iters=1))
    assert not eq.converged
    assert eq.iterations == 1
    assert eq.residual > 1e-8
    assert np.all(eq.q >= 0)


def test_iterates_monotone_and_feasible(rng):
    for _ in range(30):
        game = random_game(rng)
        q0, f0 = random_feasible_point(game, rng)
        eq = solve_potential(game, start=(q0, f0), record=True)
        h = np.array(eq.history)
        assert np.all(np.diff(h) >= -1e-9 * np.maximum(np.abs(h[1:]), 1.0))
        assert np.all(eq.q >= 0)
        assert np.all(np.abs(eq.f) <= game.graph.capacities)


def test_best_response_producer_examples(monopoly, congested):
    assert best_response_producer(monopoly, 0, [0.0], []) == pytest.approx(1200.0)
    assert best_response_producer(congested, 0, [0.0], [500.0]) == pytest.approx(1400.0)
    crowded = make_game(1, [], [0, 0])
    assert best_response_producer(crowded, 0, [0.0, 3500.0], []) == 0.0


def test_best_response_within_strategy_bound(rng):
    for _ in range(50):
        game = random_game(rng)
        q, f = random_feasible_point(game, rng)
        for i in range(game.n):
            assert 0.0 <= best_response_producer(game, i, q, f) <= producer_strategy_bound(game, i)


def test_best_response_market_maker_examples(uncongested, congested):
    f, ok, _ = best_response_market_maker(uncongested, [1500.0])
    assert ok
    np.testing.assert_allclose(f, [750.0], rtol=1e-9)
    f, ok, _ = best_response_market_maker(congested, [1400.0])
    assert ok and f[0] == 500.0
    sym = make_game(2, [(0, 1, 100.0)], [0, 1])
    f, ok, _ = best_response_market_maker(sym, [0.0, 0.0])
    np.testing.assert_allclose(f, [0.0], atol=1e-12)


def test_best_response_dynamics_examples(monopoly, congested):
    eq = best_response_dynamics(monopoly)
    assert eq.converged
    np.testing.assert_allclose(eq.q, [1200.0], rtol=1e-12)
    # one round to reach the point plus one to see no further change
    assert eq.iterations <= 2

    eq = best_response_dynamics(congested, SolverOptions(tol=1e-10))
    np.testing.assert_allclose(eq.q, [1400.0], rtol=1e-8)
    np.testing.assert_allclose(eq.f, [500.0], rtol=1e-12)


def test_best_response_dynamics_without_producers():
    game = make_game(3, [(0, 1, 50.0), (1, 2, 50.0)], [], alpha=[100.0, 120.0, 80.0])
    eq = best_response_dynamics(game)
    f, _, _ = best_response_market_maker(game, [])
    np.testing.assert_allclose(eq.f, f, atol=1e-6)


def test_best_response_dynamics_general_prices():
    gamma = 1e-5
    root = (-0.04 + np.sqrt(0.04 ** 2 + 4 * gamma * 120)) / (2 * gamma)
    price = ConcavePrice(
        lambda r: 120 - 0.04 * r - gamma * r * r,
        lambda r: -0.04 - 2 * gamma * r,
        lambda r: -2 * gamma,
        root=root,
        antiderivative=lambda r: 120 * r - 0.02 * r * r - gamma * r ** 3 / 3,
    )
    game = GameInstance(
        MarketGraph.from_lines(2, [(0, 1, 300.0)]),
        ProducerMap((0, 0)),
        (price, price),
        (QuadraticCost(0.01), QuadraticCost(0.02)),
    )
    eq = best_response_dynamics(game, SolverOptions(tol=1e-9))
    assert eq.converged
    assert eq.potential is None
    assert verify_equilibrium(game, eq.q, eq.f, 1e-5).passed


def test_verify_examples(congested, monopoly):
    rep = verify_equilibrium(congested, [1400.0], [500.0])
    assert rep.passed and rep.max_residual == pytest.approx(0.0, abs=1e-12)

    rep = verify_equilibrium(congested, [1400.0], [400.0])
    assert not rep.passed
    assert rep.line_residuals[0] == pytest.approx(abs(-(120 - 0.04 * 1000) + (120 - 0.04 * 400)))

    rep = verify_equilibrium(monopoly, [0.0], [])
    assert rep.producer_residuals[0] == pytest.approx(120.0)
    assert not rep.passed


def test_verify_rejects_infeasible(congested):
    with pytest.raises(PreconditionError):
        verify_equilibrium(congested, [1400.0], [600.0])
    with pytest.raises(PreconditionError):
        verify_equilibrium(congested, [-1.0], [0.0])


def test_verify_passes_at_solution_and_fails_when_perturbed(rng):
    tested = 0
    while tested < 40:
        game = random_game(rng)
        opts = SolverOptions()
        eq = solve_potential(game, opts)
        assert verify_equilibrium(game, eq.q, eq.f, 10 * opts.tol).passed
        active = np.flatnonzero(eq.q > 1.0)
        if active.size == 0:
            continue
        q = eq.q.copy()
        i = rng.choice(active)
        q[i] += rng.choice([-1.0, 1.0]) * rng.uniform(1e-2, 1.0)
        assert not verify_equilibrium(game, q, eq.f, 10 * opts.tol).passed
        tested += 1


def test_canonical_flow_examples():
    tree = MarketGraph.from_lines(3, [(0, 1, 10.0), (1, 2, 10.0)])
    np.testing.assert_array_equal(canonical_flow(tree, [3.0, -4.0]), [3.0, -4.0])

    tri = MarketGraph.from_lines(3, [(0, 1, 1e3), (1, 2, 1e3), (0, 2, 1e3)])
    np.testing.assert_allclose(canonical_flow(tri, [10.0, 10.0, -10.0]), 0.0, atol=1e-10)

    # tight box: the circulation cannot be fully removed from line 0
    tight = MarketGraph.from_lines(3, [(0, 1, 10.0), (1, 2, 10.0), (0, 2, 2.0)])
    f = np.array([10.0, 10.0, 2.0])
    g = canonical_flow(tight, f)
    np.testing.assert_allclose(incidence_apply(tight, g), incidence_apply(tight, f), atol=1e-10)
    assert np.all(np.abs(g) <= tight.capacities)
    assert g @ g <= f @ f


def test_canonical_flow_is_least_norm(rng):
    # compare against brute force over the one-dimensional cycle space of a
    # square with a diagonal (two independent cycles -> 2-D grid)
    graph = MarketGraph.from_lines(4, [(0, 1, 5.0), (1, 2, 4.0), (2, 3, 6.0), (3, 0, 3.0), (0, 2, 2.0)])
    c1 = np.array([1.0, 1.0, 1.0, 1.0, 0.0])
    c2 = np.array([1.0, 1.0, 0.0, 0.0, -1.0])
    for _ in range(10):
        f = rng.uniform(-1, 1, 5) * graph.capacities
        s = np.linspace(-12, 12, 961)
        S, T = np.meshgrid(s, s, indexing="ij")
        cand = f + S[..., None] * c1 + T[..., None] * c2
        ok = np.all(np.abs(cand) <= graph.capacities + 1e-12, axis=-1)
        norms = np.where(ok, np.sum(cand ** 2, axis=-1), np.inf)
        best = norms.min()
        g = canonical_flow(graph, f)
        assert g @ g <= best + 1e-9
        # grid pitch 0.025 bounds how far the grid optimum can sit from the true one
        assert g @ g >= best - 2 * 0.025 * np.sqrt(5) * np.sqrt(best) - 1e-3
