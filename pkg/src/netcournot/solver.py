"""Equilibrium computation and first-order certification.

For affine prices the equilibrium maximizes the game's potential over the box
``q >= 0, |f| <= c``; :func:`solve_potential` does that by monotone spectral
projected-gradient ascent. :func:`best_response_dynamics` reaches the same
point by letting players take turns, and serves as an independent check.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .game import (
    GameInstance,
    UnsupportedModelError,
    marshallian_welfare,
    potential,
    producer_marginal_utilities,
    producer_strategy_bound,
    producer_utility,
    strategy_bounds,
)
from .network import MarketGraph, _as_vector, incidence_apply

logger = logging.getLogger(__name__)


class PreconditionError(ValueError):
    """Raised when an input point or pair violates an operation's precondition."""


@dataclass
class SolverOptions:
    tol: float = 1e-8
    max_iters: int = 200_000
    initial_step: float | None = None  # None: 1/L from a Gershgorin bound
    backtrack: float = 0.5
    armijo: float = 1e-4
    seed: int | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol!r}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters!r}")
        if not 0 < self.backtrack < 1:
            raise ValueError(f"backtrack must lie in (0, 1), got {self.backtrack!r}")
        if not 0 < self.armijo < 1:
            raise ValueError(f"armijo must lie in (0, 1), got {self.armijo!r}")


@dataclass
class Equilibrium:
    q: np.ndarray
    f: np.ndarray
    d: np.ndarray
    p: np.ndarray
    potential: float | None
    iterations: int
    converged: bool
    residual: float
    method: str = "potential"
    history: list[float] = field(default_factory=list, repr=False)


@dataclass
class KktReport:
    producer_residuals: np.ndarray
    line_residuals: np.ndarray
    tol: float

    @property
    def max_residual(self) -> float:
        both = np.concatenate([self.producer_residuals, self.line_residuals])
        return float(np.max(both)) if both.size else 0.0

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol


@dataclass
class _AscentResult:
    x: np.ndarray
    value: float
    iterations: int
    converged: bool
    residual: float
    history: list[float]


def projected_gradient(x, g, lo, hi) -> np.ndarray:
    """Component of ``g`` that can be followed without leaving ``[lo, hi]``."""
    pg = g.copy()
    at_lo = x <= lo
    at_hi = x >= hi
    pg[at_lo] = np.maximum(g[at_lo], 0.0)
    pg[at_hi] = np.minimum(pg[at_hi], 0.0)
    return pg


def _spg_ascent(value, grad, change, lo, hi, x0, step0, opts: SolverOptions, record=False) -> _AscentResult:
    """Monotone spectral projected-gradient ascent on a box.

    ``change(x, dx)`` returns ``value(x + dx) - value(x)`` computed without
    cancellation; the Armijo test uses it so that steps near the optimum are
    not rejected because of rounding in ``value``.
    """
    x = np.clip(x0, lo, hi)
    fx = value(x)
    g = grad(x)
    step = step0
    history = [fx] if record else []
    step_min, step_max = 1e-12 * step0, 1e12 * step0
    res = float(np.max(np.abs(projected_gradient(x, g, lo, hi)), initial=0.0))
    for it in range(opts.max_iters):
        if res <= opts.tol:
            return _AscentResult(x, fx, it, True, res, history)
        t = step
        while True:
            x_new = np.clip(x + t * g, lo, hi)
            dx = x_new - x
            gain = change(x, dx)
            if gain >= opts.armijo * float(g @ dx):
                break
            t *= opts.backtrack
            if t < step_min:
                logger.debug("line search stalled at iteration %d (residual %.3g)", it, res)
                return _AscentResult(x, fx, it, False, res, history)
        g_new = grad(x_new)
        s, y = dx, g_new - g
        curv = -float(s @ y)
        step = float(np.clip(float(s @ s) / curv, step_min, step_max)) if curv > 0 else step0
        x, g = x_new, g_new
        fx = fx + gain
        if record:
            history.append(fx)
        res = float(np.max(np.abs(projected_gradient(x, g, lo, hi)), initial=0.0))
    converged = res <= opts.tol
    return _AscentResult(x, fx, opts.max_iters, converged, res, history)


def _hessian_bound(game: GameInstance, q=None) -> float:
    """Gershgorin bound on the largest eigenvalue of the negated potential Hessian."""
    n, m = game.n, game.m
    M = np.hstack([game.pmap.matrix(m).T, game.graph.incidence])
    beta = np.abs(game.price_slopes(np.zeros(m))) if not game.is_affine else game.beta
    Q = M.T @ (beta[:, None] * M)
    q = np.zeros(n) if q is None else q
    curv = game.cost_curvatures(q) + beta[game.pmap.markets]
    Q[np.arange(n), np.arange(n)] += curv
    L = float(np.max(np.sum(np.abs(Q), axis=1), initial=0.0))
    return L if L > 0 else 1.0


def potential_change(game: GameInstance, q, f, dq, df) -> float:
    """``potential(q + dq, f + df) - potential(q, f)`` without cancellation."""
    d = game.consumption(q, f)
    dd = game.consumption(dq, df)
    a, b = game.alpha, game.beta
    surplus = float(np.sum(a * dd - b * (d * dd + 0.5 * dd * dd)))
    if game.is_quadratic:
        theta = np.array([c.theta for c in game.costs])
        cost = float(np.sum(theta * (2.0 * q * dq + dq * dq)))
    else:
        cost = float(np.sum(game.cost_values(q + dq) - game.cost_values(q)))
    own = 0.5 * float(np.sum(b[game.pmap.markets] * (2.0 * q * dq + dq * dq)))
    return surplus - cost - own


def _box(game: GameInstance):
    c = game.graph.capacities
    lo = np.concatenate([np.zeros(game.n), -c])
    hi = np.concatenate([np.full(game.n, np.inf), c])
    return lo, hi


def random_feasible_point(game: GameInstance, rng: np.random.Generator):
    """Uniform draw from ``[0, qbar] x [-c, c]``."""
    q = rng.uniform(0.0, 1.0, game.n) * strategy_bounds(game)
    c = game.graph.capacities
    f = rng.uniform(-1.0, 1.0, game.l) * c
    return q, f


def _equilibrium(game: GameInstance, q, f, **kw) -> Equilibrium:
    d = game.consumption(q, f)
    return Equilibrium(q=q, f=f, d=d, p=game.price_vector(d), **kw)


def solve_potential(game: GameInstance, opts: SolverOptions | None = None, start=None, record=False) -> Equilibrium:
    """Nash equilibrium of an affine-price game as the potential's maximizer.

    The starting point is ``start`` if given, else a random feasible point
    when ``opts.seed`` is set, else the origin. The returned flow is
    :func:`canonical_flow` of the ascent's endpoint. With ``record=True`` the
    potential value at every accepted iterate is kept in ``history``.
    """
    opts = opts or SolverOptions()
    if not game.is_affine:
        raise UnsupportedModelError("solve_potential requires affine prices; use best_response_dynamics")
    n = game.n
    if start is not None:
        q0, f0 = start
        x0 = np.concatenate([_as_vector(q0, n, "production"), _as_vector(f0, game.l, "flow")])
    elif opts.seed is not None:
        x0 = np.concatenate(random_feasible_point(game, np.random.default_rng(opts.seed)))
    else:
        x0 = np.zeros(n + game.l)
    lo, hi = _box(game)

    def value(x):
        return potential(game, x[:n], x[n:])

    def grad(x):
        d = game.consumption(x[:n], x[n:])
        p = game.alpha - game.beta * d
        j = game.pmap.markets
        gq = p[j] - game.beta[j] * x[:n] - game.cost_slopes(x[:n])
        gf = p[game.graph.heads] - p[game.graph.tails]
        return np.concatenate([gq, gf])

    def change(x, dx):
        return potential_change(game, x[:n], x[n:], dx[:n], dx[n:])

    step0 = opts.initial_step or 1.0 / _hessian_bound(game)
    out = _spg_ascent(value, grad, change, lo, hi, x0, step0, opts, record=record)
    if not out.converged:
        logger.warning("solve_potential stopped after %d iterations, residual %.3g", out.iterations, out.residual)
    q = out.x[:n].copy()
    f = canonical_flow(game.graph, out.x[n:])
    return _equilibrium(
        game, q, f,
        potential=potential(game, q, f),
        iterations=out.iterations,
        converged=out.converged,
        residual=out.residual,
        method="potential",
        history=out.history,
    )


def _golden_max(fun, a: float, b: float, tol: float) -> float:
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    # endpoints win ties so that corner optima (typically q = 0) are exact
    candidates = [(fun(x), x), (fun(a), a), (fun(b), b)]
    return max(candidates)[1]


def best_response_producer(game: GameInstance, i: int, q, f) -> float:
    """Profit-maximizing production of producer ``i`` given the others and the flow.

    Only ``q[-i]`` is read; ``q[i]`` is ignored.
    """
    q = np.array(_as_vector(q, game.n, "production"))
    q[i] = 0.0
    d = game.consumption(q, f)
    j = game.pmap.assignment[i]
    price = game.prices[j]
    cost = game.costs[i]
    if game.is_affine and game.is_quadratic:
        return max(0.0, float(price(d[j])) / (2.0 * price.beta + 2.0 * cost.theta))
    qbar = producer_strategy_bound(game, i)

    def profit(x):
        qq = q.copy()
        qq[i] = x
        return producer_utility(game, i, qq, f)

    return _golden_max(profit, 0.0, qbar, 1e-10 * qbar)


def best_response_market_maker(game: GameInstance, q, opts: SolverOptions | None = None, start=None):
    """Welfare-maximizing flow for fixed productions.

    Returns ``(f, converged, residual)``.
    """
    opts = opts or SolverOptions()
    graph = game.graph
    q = _as_vector(q, game.n, "production")
    c = graph.capacities
    if graph.l == 0:
        return np.zeros(0), True, 0.0
    production = game.pmap.aggregate(q, game.m)
    f0 = np.zeros(graph.l) if start is None else _as_vector(start, graph.l, "flow")

    def value(f):
        return marshallian_welfare(game, q, f)

    def grad(f):
        p = game.price_vector(production + incidence_apply(graph, f))
        return p[graph.heads] - p[graph.tails]

    if game.is_affine:
        def change(f, df):
            d = production + incidence_apply(graph, f)
            dd = incidence_apply(graph, df)
            return float(np.sum(game.alpha * dd - game.beta * (d * dd + 0.5 * dd * dd)))
        slopes = game.beta
    else:
        def change(f, df):
            return value(f + df) - value(f)
        slopes = np.abs(game.price_slopes(production + incidence_apply(graph, f0)))

    B = graph.incidence
    L = float(np.max(np.sum(np.abs(B.T @ (slopes[:, None] * B)), axis=1)))
    step0 = opts.initial_step or 1.0 / max(L, 1e-300)
    out = _spg_ascent(value, grad, change, -c, c, f0, step0, opts)
    return out.x, out.converged, out.residual


def best_response_dynamics(game: GameInstance, opts: SolverOptions | None = None, start=None) -> Equilibrium:
    """Round-robin best responses: producers in index order, then the market maker.

    Stops when a full round moves ``(q, f)`` by at most ``opts.tol`` in
    sup-norm. No convergence guarantee is claimed for non-affine prices.
    """
    opts = opts or SolverOptions()
    if start is None:
        q = np.zeros(game.n)
        f = np.zeros(game.l)
    else:
        q = np.array(_as_vector(start[0], game.n, "production"))
        f = np.array(_as_vector(start[1], game.l, "flow"))
    converged = False
    change = np.inf
    rounds = 0
    for rounds in range(1, opts.max_iters + 1):
        q_prev, f_prev = q.copy(), f.copy()
        for i in range(game.n):
            q[i] = best_response_producer(game, i, q, f)
        f, _, _ = best_response_market_maker(game, q, opts, start=f)
        change = max(
            float(np.max(np.abs(q - q_prev), initial=0.0)),
            float(np.max(np.abs(f - f_prev), initial=0.0)),
        )
        if change <= opts.tol:
            converged = True
            break
    if not converged:
        logger.warning("best_response_dynamics did not settle in %d rounds (last change %.3g)", rounds, change)
    f = canonical_flow(game.graph, f)
    return _equilibrium(
        game, q, f,
        potential=potential(game, q, f) if game.is_affine else None,
        iterations=rounds,
        converged=converged,
        residual=change,
        method="br",
    )


def _bound_tol(c: np.ndarray) -> np.ndarray:
    return 1e-12 * np.maximum(c, 1.0)


def verify_equilibrium(game: GameInstance, q, f, tol: float = 1e-6) -> KktReport:
    """First-order residuals of every player at ``(q, f)``.

    Producer ``i`` contributes ``|min(q_i, -g_i)|`` with ``g_i`` its marginal
    profit. Line ``k`` contributes the distance of its welfare gradient to the
    normal cone of ``[-c_k, c_k]`` at ``f_k``.
    """
    q = _as_vector(q, game.n, "production")
    f = _as_vector(f, game.l, "flow")
    c = game.graph.capacities
    if np.any(q < 0) or not np.all(np.isfinite(q)):
        raise PreconditionError("productions must be finite and nonnegative")
    slack = _bound_tol(c)
    if np.any(np.abs(f) > c + slack) or not np.all(np.isfinite(f)):
        raise PreconditionError("flow violates line capacities")
    g = producer_marginal_utilities(game, q, f)
    prod = np.abs(np.minimum(q, -g))
    p = game.price_vector(game.consumption(q, f))
    gl = p[game.graph.heads] - p[game.graph.tails]
    at_hi = f >= c - slack
    at_lo = f <= -c + slack
    line = np.abs(gl)
    line[at_hi] = np.maximum(0.0, -gl[at_hi])
    line[at_lo] = np.maximum(0.0, gl[at_lo])
    line[at_hi & at_lo] = 0.0
    return KktReport(prod, line, tol)


def canonical_flow(graph: MarketGraph, f) -> np.ndarray:
    """Minimum-norm feasible flow with the same net injections as ``f``.

    Flows are only pinned up to circulations; this picks a deterministic
    representative. A heavily weighted bounded least-squares problem
    (``min |g|^2 + w |B g - B f|^2`` over the capacity box) identifies which
    lines sit at a bound; the free lines are then solved exactly so that
    ``B g == B f`` to rounding. Falls back to ``f`` if the result does not
    check out.
    """
    f = _as_vector(f, graph.l, "flow")
    c = graph.capacities
    if graph.l - graph.m + 1 <= 0:
        return f.copy()
    r = incidence_apply(graph, f)
    B = graph.incidence
    scale = max(float(np.max(np.abs(f), initial=0.0)), float(np.max(c, initial=0.0)), 1.0)
    weight = 1e6
    open_ = c > 0
    sol = np.zeros(graph.l)
    if np.any(open_):
        k = int(np.sum(open_))
        A = np.vstack([np.eye(k), weight * B[:, open_]])
        b = np.concatenate([np.zeros(k), weight * r])
        sol[open_] = optimize.lsq_linear(A, b, bounds=(-c[open_], c[open_]), method="bvls", tol=1e-14).x

    slack = 1e-9 * scale
    upper = sol >= c - slack
    lower = (sol <= -c + slack) & ~upper
    fixed = upper | lower
    g = np.where(upper, c, np.where(lower, -c, 0.0))
    if np.any(~fixed):
        Bf = B[:, ~fixed]
        mu = np.linalg.lstsq(Bf @ Bf.T, r - B[:, fixed] @ g[fixed], rcond=None)[0]
        g[~fixed] = Bf.T @ mu
    g = np.clip(g, -c - _bound_tol(c), c + _bound_tol(c))
    g = np.clip(g, -c, c)
    ok = float(np.max(np.abs(B @ g - r))) <= 1e-10 * scale and float(g @ g) <= float(f @ f) * (1 + 1e-12) + 1e-12
    if not ok:
        logger.debug("canonical_flow fell back to the input flow")
        return f.copy()
    return g
