"""Small game builders: the closed-form two-market cases and random instances."""

from __future__ import annotations

import numpy as np

from .game import GameInstance, make_game

ALPHA, BETA, THETA = 120.0, 0.04, 0.01


def isolated_market(alpha=ALPHA, beta=BETA, theta=THETA) -> GameInstance:
    """One market, one producer, no lines."""
    return make_game(1, [], [0], alpha, beta, theta)


def two_markets(capacity: float, alpha=ALPHA, beta=BETA, theta=THETA) -> GameInstance:
    """Markets 0 and 1 joined by one line 0 -> 1; a single producer at market 0."""
    return make_game(2, [(0, 1, capacity)], [0], alpha, beta, theta)


def random_game(
    rng: np.random.Generator,
    max_markets: int = 8,
    max_producers: int | None = None,
    max_lines: int | None = None,
    capacity: tuple[float, float] = (0.0, 600.0),
) -> GameInstance:
    """Random connected affine/quadratic game.

    A random spanning tree keeps the graph connected; extra lines (possibly
    parallel) add cycles. Capacities are uniform on ``capacity``, which with
    the default range is tight enough that most instances show congestion.
    """
    m = int(rng.integers(1, max_markets + 1))
    lines = []
    for j in range(1, m):
        a = int(rng.integers(0, j))
        lines.append((a, j) if rng.random() < 0.5 else (j, a))
    extra_cap = (max_lines - len(lines)) if max_lines is not None else m
    if m > 1 and extra_cap > 0:
        for _ in range(int(rng.integers(0, extra_cap + 1))):
            a, b = rng.choice(m, 2, replace=False)
            lines.append((int(a), int(b)))
    n_max = 2 * m if max_producers is None else max_producers
    n = int(rng.integers(0, n_max + 1))
    assignment = rng.integers(0, m, n)
    caps = rng.uniform(*capacity, len(lines))
    return make_game(
        m,
        [(a, b, float(c)) for (a, b), c in zip(lines, caps)],
        [int(j) for j in assignment],
        alpha=rng.uniform(60.0, 150.0, m),
        beta=rng.uniform(0.01, 0.1, m),
        theta=rng.uniform(0.0, 0.05, n),
    )
