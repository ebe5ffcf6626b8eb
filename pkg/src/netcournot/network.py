"""Market network: markets joined by capacitated lines, and producers attached to markets.

Lines are stored as a list of ``(tail, head, capacity)`` triples with 0-based
market indices. The node-link incidence matrix is materialized on demand; the
sign convention is ``+1`` at the head and ``-1`` at the tail, so a positive flow
on line ``k`` moves energy from its tail market into its head market.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when a vector does not match the network dimensions."""


class ValidationError(ValueError):
    """Raised when a network, producer map or game violates a model rule."""

    def __init__(self, message: str, report: "ValidationReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class MarketGraph:
    m: int
    lines: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        lines = tuple((int(a), int(b), float(c)) for a, b, c in self.lines)
        object.__setattr__(self, "lines", lines)
        if self.m < 1:
            raise ValidationError("a market graph needs at least one market")

    @classmethod
    def from_lines(cls, m: int, lines: Sequence[tuple[int, int, float]]) -> "MarketGraph":
        return cls(m, tuple(lines))

    @property
    def l(self) -> int:  # noqa: E743
        return len(self.lines)

    @cached_property
    def tails(self) -> np.ndarray:
        return np.array([a for a, _, _ in self.lines], dtype=int)

    @cached_property
    def heads(self) -> np.ndarray:
        return np.array([b for _, b, _ in self.lines], dtype=int)

    @cached_property
    def capacities(self) -> np.ndarray:
        c = np.array([c for _, _, c in self.lines], dtype=float)
        c.setflags(write=False)
        return c

    @cached_property
    def incidence(self) -> np.ndarray:
        """Dense ``m x l`` node-link incidence matrix B."""
        B = np.zeros((self.m, self.l))
        for k, (a, b, _) in enumerate(self.lines):
            B[a, k] -= 1.0
            B[b, k] += 1.0
        B.setflags(write=False)
        return B

    def adjacency(self) -> list[list[int]]:
        """Line indices incident to each market."""
        adj: list[list[int]] = [[] for _ in range(self.m)]
        for k, (a, b, _) in enumerate(self.lines):
            adj[a].append(k)
            if b != a:
                adj[b].append(k)
        return adj

    def is_connected(self) -> bool:
        seen = {0}
        queue = deque([0])
        adj = self.adjacency()
        while queue:
            u = queue.popleft()
            for k in adj[u]:
                a, b, _ = self.lines[k]
                v = b if a == u else a
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == self.m

    def is_feasible(self, f, atol: float = 0.0) -> bool:
        f = _as_vector(f, self.l, "flow")
        return bool(np.all(np.abs(f) <= self.capacities + atol))


@dataclass(frozen=True)
class ProducerMap:
    """Assignment of each producer to the single market it sells on."""

    assignment: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(int(j) for j in self.assignment))

    @classmethod
    def from_matrix(cls, H) -> "ProducerMap":
        """Build from a 0/1 producer-market matrix; every row must hold exactly one 1."""
        H = np.asarray(H, dtype=float)
        if H.ndim != 2:
            raise DimensionError("producer-market matrix must be two-dimensional")
        ok = np.all((H == 0) | (H == 1), axis=1) & (H.sum(axis=1) == 1)
        if not np.all(ok):
            bad = [int(i) for i in np.flatnonzero(~ok)]
            raise ValidationError(f"producers {bad} do not sell on exactly one market")
        return cls(tuple(int(j) for j in np.argmax(H, axis=1)))

    @property
    def n(self) -> int:
        return len(self.assignment)

    @cached_property
    def markets(self) -> np.ndarray:
        return np.array(self.assignment, dtype=int)

    def matrix(self, m: int) -> np.ndarray:
        """Dense ``n x m`` producer-market incidence matrix H."""
        H = np.zeros((self.n, m))
        H[np.arange(self.n), self.markets] = 1.0
        return H

    def aggregate(self, values, m: int) -> np.ndarray:
        """Sum per-producer ``values`` into their markets (``H.T @ values``)."""
        values = _as_vector(values, self.n, "production")
        out = np.zeros(m)
        np.add.at(out, self.markets, values)
        return out

    def producers_at(self, j: int) -> list[int]:
        return [i for i, jj in enumerate(self.assignment) if jj == j]


@dataclass
class ValidationReport:
    connectivity: bool = True
    capacities: bool = True
    self_loops: bool = True
    single_market: bool = True
    messages: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.connectivity and self.capacities and self.self_loops and self.single_market

    @property
    def failures(self) -> list[str]:
        names = ("connectivity", "capacities", "self_loops", "single_market")
        return [name for name in names if not getattr(self, name)]


def _as_vector(x, size: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1) if np.ndim(x) else np.asarray([x], dtype=float)
    if x.shape != (size,):
        raise DimensionError(f"{what} vector has length {x.size}, expected {size}")
    return x


def incidence_apply(graph: MarketGraph, f) -> np.ndarray:
    """Net injection ``r = B f`` into each market."""
    f = _as_vector(f, graph.l, "flow")
    r = np.zeros(graph.m)
    np.add.at(r, graph.heads, f)
    np.subtract.at(r, graph.tails, f)
    return r


def consumption(graph: MarketGraph, pmap: ProducerMap, q, f) -> np.ndarray:
    """Total consumption ``d = B f + H^T q`` in each market."""
    return incidence_apply(graph, f) + pmap.aggregate(q, graph.m)


def market_capacity_bound(graph: MarketGraph, j: int) -> float:
    """Total capacity of the lines incident to market ``j``.

    This bounds ``|(B f)_j|`` for every feasible flow, which is what the
    producer strategy box needs.
    """
    if not 0 <= j < graph.m:
        raise IndexError(f"market index {j} out of range for {graph.m} markets")
    return float(sum(c for a, b, c in graph.lines if a == j or b == j))


def validate(graph: MarketGraph, pmap: ProducerMap) -> ValidationReport:
    report = ValidationReport()
    for k, (a, b, c) in enumerate(graph.lines):
        if not (0 <= a < graph.m and 0 <= b < graph.m):
            report.connectivity = False
            report.messages.append(f"line {k} references a market outside 0..{graph.m - 1}")
        if a == b:
            report.self_loops = False
            report.messages.append(f"line {k} is a self-loop at market {a}")
        if not (np.isfinite(c) and c >= 0):
            report.capacities = False
            report.messages.append(f"line {k} has invalid capacity {c!r}")
    if report.connectivity and not graph.is_connected():
        report.connectivity = False
        report.messages.append("market graph is not connected")
    for i, j in enumerate(pmap.assignment):
        if not 0 <= j < graph.m:
            report.single_market = False
            report.messages.append(f"producer {i} is assigned to invalid market {j}")
    return report
