"""Game primitives: prices, costs, producer profits, welfare and the potential."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np
from scipy import integrate

from .network import (
    MarketGraph,
    ProducerMap,
    ValidationError,
    _as_vector,
    consumption,
    market_capacity_bound,
    validate,
)


class UnsupportedModelError(ValueError):
    """Raised when an operation needs affine prices but the game has general ones."""


class NumericalError(RuntimeError):
    """Raised when an adaptive quadrature fails to reach its tolerance."""


@dataclass(frozen=True)
class AffinePrice:
    """Inverse demand ``P(r) = alpha - beta * r``."""

    alpha: float
    beta: float

    @property
    def root(self) -> float:
        return self.alpha / self.beta

    def __call__(self, r):
        return self.alpha - self.beta * np.asarray(r, dtype=float)

    def slope(self, r):
        return -self.beta + 0.0 * np.asarray(r, dtype=float)

    def curvature(self, r):
        return 0.0 * np.asarray(r, dtype=float)

    def integral(self, r):
        r = np.asarray(r, dtype=float)
        return self.alpha * r - 0.5 * self.beta * r * r


@dataclass(frozen=True)
class ConcavePrice:
    """General decreasing concave inverse demand given by callables.

    ``root`` is the consumption level at which the price reaches zero; it is
    supplied by the modeler rather than searched for. ``antiderivative``, when
    given, must vanish at zero and replaces numerical quadrature in welfare.
    """

    value: Callable[[float], float]
    derivative: Callable[[float], float]
    second_derivative: Callable[[float], float]
    root: float
    antiderivative: Callable[[float], float] | None = None

    def __call__(self, r):
        return np.vectorize(self.value, otypes=[float])(r)

    def slope(self, r):
        return np.vectorize(self.derivative, otypes=[float])(r)

    def curvature(self, r):
        return np.vectorize(self.second_derivative, otypes=[float])(r)

    def integral(self, r):
        if self.antiderivative is not None:
            return np.vectorize(self.antiderivative, otypes=[float])(r)
        return np.vectorize(self._quad, otypes=[float])(r)

    def _quad(self, r: float) -> float:
        out = integrate.quad(self.value, 0.0, r, epsabs=1e-9, epsrel=1e-14, limit=200, full_output=1)
        value, abserr = out[0], out[1]
        # 1e-9 absolute is below double resolution once the integral passes ~1e7
        if abserr > max(1e-9, 1e-12 * abs(value)):
            msg = out[3] if len(out) > 3 else ""
            raise NumericalError(
                f"price integral on [0, {r}] did not converge (abserr={abserr:.3g}) {msg}".strip()
            )
        return value


@dataclass(frozen=True)
class QuadraticCost:
    """Production cost ``C(q) = theta * q**2``."""

    theta: float

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        return self.theta * q * q

    def slope(self, q):
        return 2.0 * self.theta * np.asarray(q, dtype=float)

    def curvature(self, q):
        return 2.0 * self.theta + 0.0 * np.asarray(q, dtype=float)


@dataclass(frozen=True)
class ConvexCost:
    value: Callable[[float], float]
    derivative: Callable[[float], float]
    second_derivative: Callable[[float], float]

    def __call__(self, q):
        return np.vectorize(self.value, otypes=[float])(q)

    def slope(self, q):
        return np.vectorize(self.derivative, otypes=[float])(q)

    def curvature(self, q):
        return np.vectorize(self.second_derivative, otypes=[float])(q)


PriceFunction = Union[AffinePrice, ConcavePrice]
CostFunction = Union[QuadraticCost, ConvexCost]

# grid size for probing general price/cost callables against the model rules
_PROBE_POINTS = 33


def check_price(price: PriceFunction) -> list[str]:
    """Model rules for one price function; returns the violated ones."""
    problems = []
    if isinstance(price, AffinePrice):
        if not (np.isfinite(price.alpha) and np.isfinite(price.beta)):
            problems.append("price parameters must be finite")
        elif price.beta <= 0:
            problems.append(f"beta must be positive, got {price.beta!r}")
        elif price.alpha <= 0:
            problems.append(f"alpha must be positive for a positive zero-price root, got {price.alpha!r}")
        return problems
    root = price.root
    if not (np.isfinite(root) and root > 0):
        return [f"zero-price root must be finite and positive, got {root!r}"]
    if abs(float(price.value(root))) > 1e-8 * max(1.0, abs(float(price.value(0.0)))):
        problems.append(f"price at stated root {root!r} is not zero")
    grid = np.linspace(0.0, 2.0 * root, _PROBE_POINTS)
    if np.any(price.slope(grid) >= 0):
        problems.append("price must be strictly decreasing")
    if np.any(price.curvature(grid) > 0):
        problems.append("price must be concave")
    return problems


def check_cost(cost: CostFunction, scale: float = 1.0) -> list[str]:
    """Model rules for one cost function; ``scale`` sets the probing range."""
    if isinstance(cost, QuadraticCost):
        if not np.isfinite(cost.theta) or cost.theta < 0:
            return [f"theta must be nonnegative, got {cost.theta!r}"]
        return []
    problems = []
    grid = np.linspace(0.0, max(scale, 1.0), _PROBE_POINTS)
    if np.any(cost.slope(grid) < 0):
        problems.append("cost must be nondecreasing")
    if np.any(cost.curvature(grid) < 0):
        problems.append("cost must be convex")
    return problems


@dataclass(frozen=True)
class GameInstance:
    graph: MarketGraph
    pmap: ProducerMap
    prices: tuple = ()
    costs: tuple = ()
    names: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "prices", tuple(self.prices))
        object.__setattr__(self, "costs", tuple(self.costs))
        if len(self.prices) != self.graph.m:
            raise ValidationError(f"{len(self.prices)} price functions for {self.graph.m} markets")
        if len(self.costs) != self.pmap.n:
            raise ValidationError(f"{len(self.costs)} cost functions for {self.pmap.n} producers")
        report = validate(self.graph, self.pmap)
        if not report.passed:
            raise ValidationError("; ".join(report.messages), report)
        for j, p in enumerate(self.prices):
            problems = check_price(p)
            if problems:
                raise ValidationError(f"market {j}: " + "; ".join(problems))
        for i, c in enumerate(self.costs):
            scale = self.prices[self.pmap.assignment[i]].root
            problems = check_cost(c, scale)
            if problems:
                raise ValidationError(f"producer {i}: " + "; ".join(problems))

    @property
    def n(self) -> int:
        return self.pmap.n

    @property
    def m(self) -> int:
        return self.graph.m

    @property
    def l(self) -> int:  # noqa: E743
        return self.graph.l

    @cached_property
    def is_affine(self) -> bool:
        return all(isinstance(p, AffinePrice) for p in self.prices)

    @cached_property
    def is_quadratic(self) -> bool:
        return all(isinstance(c, QuadraticCost) for c in self.costs)

    @cached_property
    def alpha(self) -> np.ndarray:
        self._require_affine()
        return np.array([p.alpha for p in self.prices])

    @cached_property
    def beta(self) -> np.ndarray:
        self._require_affine()
        return np.array([p.beta for p in self.prices])

    @cached_property
    def roots(self) -> np.ndarray:
        return np.array([p.root for p in self.prices])

    def _require_affine(self):
        if not self.is_affine:
            raise UnsupportedModelError("operation requires affine price functions in every market")

    def price_vector(self, d) -> np.ndarray:
        d = _as_vector(d, self.m, "consumption")
        if self.is_affine:
            return self.alpha - self.beta * d
        return np.array([float(p(x)) for p, x in zip(self.prices, d)])

    def price_slopes(self, d) -> np.ndarray:
        d = _as_vector(d, self.m, "consumption")
        if self.is_affine:
            return -self.beta.copy()
        return np.array([float(p.slope(x)) for p, x in zip(self.prices, d)])

    def cost_values(self, q) -> np.ndarray:
        q = _as_vector(q, self.n, "production")
        if self.is_quadratic:
            return self._theta * q * q
        return np.array([float(c(x)) for c, x in zip(self.costs, q)])

    def cost_slopes(self, q) -> np.ndarray:
        q = _as_vector(q, self.n, "production")
        if self.is_quadratic:
            return 2.0 * self._theta * q
        return np.array([float(c.slope(x)) for c, x in zip(self.costs, q)])

    def cost_curvatures(self, q) -> np.ndarray:
        q = _as_vector(q, self.n, "production")
        return np.array([float(c.curvature(x)) for c, x in zip(self.costs, q)])

    @cached_property
    def _theta(self) -> np.ndarray:
        return np.array([c.theta for c in self.costs])

    def consumption(self, q, f) -> np.ndarray:
        return consumption(self.graph, self.pmap, q, f)


def _check_q(game: GameInstance, q) -> np.ndarray:
    return _as_vector(q, game.n, "production")


def producer_utility(game: GameInstance, i: int, q, f) -> float:
    """Profit of producer ``i``: revenue at its market price minus its cost."""
    q = _check_q(game, q)
    if not 0 <= i < game.n:
        raise IndexError(f"producer index {i} out of range for {game.n} producers")
    d = game.consumption(q, f)
    j = game.pmap.assignment[i]
    return float(q[i] * game.prices[j](d[j]) - game.costs[i](q[i]))


def producer_marginal_utilities(game: GameInstance, q, f) -> np.ndarray:
    """``du_i/dq_i`` for every producer, holding the others and the flow fixed."""
    q = _check_q(game, q)
    d = game.consumption(q, f)
    j = game.pmap.markets
    return game.price_vector(d)[j] + q * game.price_slopes(d)[j] - game.cost_slopes(q)


def marshallian_welfare(game: GameInstance, q, f) -> float:
    """Consumer surplus summed over markets minus total production cost."""
    q = _check_q(game, q)
    d = game.consumption(q, f)
    if game.is_affine:
        surplus = float(np.sum(game.alpha * d - 0.5 * game.beta * d * d))
    else:
        surplus = float(sum(float(p.integral(x)) for p, x in zip(game.prices, d)))
    return surplus - float(np.sum(game.cost_values(q)))


def potential(game: GameInstance, q, f) -> float:
    """Exact potential of the affine-price game.

    Welfare minus ``beta_j / 2`` times the sum of squared productions of the
    producers at each market ``j``.
    """
    game._require_affine()
    q = _check_q(game, q)
    penalty = 0.5 * float(np.sum(game.beta * game.pmap.aggregate(q * q, game.m)))
    return marshallian_welfare(game, q, f) - penalty


def potential_gradient(game: GameInstance, q, f) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the potential with respect to productions and flows."""
    game._require_affine()
    q = _check_q(game, q)
    d = game.consumption(q, f)
    p = game.price_vector(d)
    j = game.pmap.markets
    grad_q = p[j] - game.beta[j] * q - game.cost_slopes(q)
    grad_f = p[game.graph.heads] - p[game.graph.tails]
    return grad_q, grad_f


def producer_strategy_bound(game: GameInstance, i: int) -> float:
    """Upper end of the box that always contains producer ``i``'s best response."""
    if not 0 <= i < game.n:
        raise IndexError(f"producer index {i} out of range for {game.n} producers")
    j = game.pmap.assignment[i]
    return float(game.prices[j].root + market_capacity_bound(game.graph, j))


def strategy_bounds(game: GameInstance) -> np.ndarray:
    return np.array([producer_strategy_bound(game, i) for i in range(game.n)])


def make_game(
    m: int,
    lines: Sequence[tuple[int, int, float]],
    assignment: Sequence[int],
    alpha=120.0,
    beta=0.04,
    theta=0.01,
) -> GameInstance:
    """Affine/quadratic game from scalars or per-market/per-producer sequences."""
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (m,))
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (m,))
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (len(assignment),))
    return GameInstance(
        MarketGraph.from_lines(m, lines),
        ProducerMap(tuple(assignment)),
        tuple(AffinePrice(float(a), float(b)) for a, b in zip(alpha, beta)),
        tuple(QuadraticCost(float(t)) for t in theta),
    )
