"""Price groups, flow reports and saturated-cut certificates at an equilibrium.

A price gap between two markets at equilibrium has to be explained by a set of
lines running at full capacity that separates them. The certificate search
here grows the set of markets that can still receive extra flow from the
cheaper market (a residual-graph closure); when the expensive market is not in
that set, the lines leaving it are the saturated cut.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .game import GameInstance
from .network import MarketGraph, _as_vector
from .solver import Equilibrium, KktReport, PreconditionError, verify_equilibrium


@dataclass
class PriceGroupReport:
    groups: list[list[int]]
    group_prices: list[float]
    mean_price: float

    def group_of(self) -> dict[int, int]:
        return {j: g for g, members in enumerate(self.groups) for j in members}


@dataclass
class CrossingLine:
    line: int
    tail: int
    head: int
    outward: bool  # tail inside the cut set
    flow: float
    capacity: float
    saturated: bool


@dataclass
class CutCertificate:
    h: int
    j: int
    U: frozenset[int]
    crossing: list[CrossingLine]

    def is_valid(self, sat_tol: float) -> bool:
        if self.h not in self.U or self.j in self.U:
            return False
        for x in self.crossing:
            target = x.capacity if x.outward else -x.capacity
            if abs(x.flow - target) > sat_tol:
                return False
        return True


@dataclass
class PairResult:
    h: int
    j: int
    certificate: CutCertificate | None

    @property
    def violated(self) -> bool:
        return self.certificate is None


@dataclass
class Theorem2Report:
    prices: PriceGroupReport
    pairs: list[PairResult]
    strict_pairs: list[PairResult] = field(default_factory=list)
    kkt: KktReport | None = None

    @property
    def passed(self) -> bool:
        return all(not p.violated for p in self.pairs)

    @property
    def strict_passed(self) -> bool:
        return all(not p.violated for p in self.strict_pairs)

    @property
    def violations(self) -> list[tuple[int, int]]:
        return [(p.h, p.j) for p in self.pairs if p.violated]


@dataclass
class LineRecord:
    line: int
    tail: int
    head: int
    flow: float
    capacity: float
    utilization: float
    saturated: bool
    direction: int  # +1 along (tail, head), -1 against, 0 idle
    degenerate: bool

    @property
    def source(self) -> int:
        return self.head if self.direction < 0 else self.tail

    @property
    def target(self) -> int:
        return self.tail if self.direction < 0 else self.head


def default_sat_tol(graph: MarketGraph) -> float:
    cmax = float(np.max(graph.capacities, initial=0.0))
    return 1e-6 * cmax if cmax > 0 else 1e-12


def price_groups(p, tol: float = 1e-4) -> PriceGroupReport:
    """Cluster markets whose sorted prices are separated by gaps of at most ``tol``.

    Groups come out in descending price order; a group's price is the mean of
    its members' prices.
    """
    if not tol > 0:
        raise ValueError(f"price tolerance must be positive, got {tol!r}")
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size == 0:
        return PriceGroupReport([], [], float("nan"))
    order = sorted(range(p.size), key=lambda j: (-p[j], j))
    groups = [[order[0]]]
    for prev, j in zip(order, order[1:]):
        if p[prev] - p[j] > tol:
            groups.append([j])
        else:
            groups[-1].append(j)
    groups = [sorted(g) for g in groups]
    return PriceGroupReport(groups, [float(np.mean(p[g])) for g in groups], float(np.mean(p)))


def residual_reachable(graph: MarketGraph, f, sources, sat_tol: float) -> set[int]:
    """Markets that can absorb extra flow pushed out of ``sources``.

    Line ``k`` from ``a`` to ``b`` can be crossed ``a -> b`` while it has
    forward headroom ``c_k - f_k > sat_tol`` and ``b -> a`` while
    ``c_k + f_k > sat_tol``.
    """
    f = _as_vector(f, graph.l, "flow")
    c = graph.capacities
    adj = graph.adjacency()
    seen = set(int(s) for s in sources)
    queue = deque(seen)
    while queue:
        u = queue.popleft()
        for k in adj[u]:
            a, b, _ = graph.lines[k]
            if a == u and b not in seen and c[k] - f[k] > sat_tol:
                seen.add(b)
                queue.append(b)
            elif b == u and a not in seen and c[k] + f[k] > sat_tol:
                seen.add(a)
                queue.append(a)
    return seen


def find_saturated_cut(graph: MarketGraph, f, h: int, j: int, sat_tol: float) -> CutCertificate | None:
    if h == j:
        raise PreconditionError("a cut needs two distinct markets")
    for x in (h, j):
        if not 0 <= x < graph.m:
            raise IndexError(f"market index {x} out of range for {graph.m} markets")
    f = _as_vector(f, graph.l, "flow")
    U = residual_reachable(graph, f, {h}, sat_tol)
    if j in U:
        return None
    c = graph.capacities
    crossing = []
    for k, (a, b, cap) in enumerate(graph.lines):
        if (a in U) == (b in U):
            continue
        outward = a in U
        target = cap if outward else -cap
        crossing.append(CrossingLine(k, a, b, outward, float(f[k]), float(c[k]),
                                     abs(f[k] - target) <= sat_tol))
    return CutCertificate(h, j, frozenset(U), crossing)


def verify_theorem2(
    game: GameInstance,
    eq: Equilibrium,
    price_tol: float = 1e-4,
    sat_tol: float | None = None,
    kkt_tol: float = 1e-6,
) -> Theorem2Report:
    """Check that every price gap around the mean price is backed by a saturated cut.

    Required pairs are ``(h, j)`` with ``p_h < mean - price_tol`` and
    ``p_j > mean + price_tol``. As a stricter diagnostic every pair with
    ``p_h < p_j - price_tol`` is also scanned; it is reported separately and
    does not affect :attr:`Theorem2Report.passed`.
    """
    kkt = verify_equilibrium(game, eq.q, eq.f, kkt_tol)
    if not kkt.passed:
        raise PreconditionError(
            f"point is not a verified equilibrium (max KKT residual {kkt.max_residual:.3g} > {kkt_tol:g})"
        )
    sat_tol = default_sat_tol(game.graph) if sat_tol is None else sat_tol
    p = np.asarray(eq.p, dtype=float)
    groups = price_groups(p, price_tol)
    mean = groups.mean_price
    low = [h for h in range(game.m) if p[h] < mean - price_tol]
    high = [j for j in range(game.m) if p[j] > mean + price_tol]

    cache: dict[tuple[int, int], CutCertificate | None] = {}

    def cut(h, j):
        if (h, j) not in cache:
            cache[h, j] = find_saturated_cut(game.graph, eq.f, h, j, sat_tol)
        return cache[h, j]

    pairs = [PairResult(h, j, cut(h, j)) for h in low for j in high]
    strict = [
        PairResult(h, j, cut(h, j))
        for h in range(game.m)
        for j in range(game.m)
        if p[h] < p[j] - price_tol
    ]
    return Theorem2Report(groups, pairs, strict, kkt)


def flow_report(game: GameInstance, eq: Equilibrium, sat_tol: float | None = None) -> list[LineRecord]:
    graph = game.graph
    f = _as_vector(eq.f, graph.l, "flow")
    c = graph.capacities
    if np.any(np.abs(f) > c + 1e-12 * np.maximum(c, 1.0)):
        raise PreconditionError("flow violates line capacities")
    sat_tol = default_sat_tol(graph) if sat_tol is None else sat_tol
    out = []
    for k, (a, b, cap) in enumerate(graph.lines):
        degenerate = cap == 0
        util = 0.0 if degenerate else min(abs(f[k]) / cap, 1.0)
        out.append(LineRecord(
            line=k,
            tail=a,
            head=b,
            flow=float(f[k]),
            capacity=float(cap),
            utilization=float(util),
            saturated=bool(cap - abs(f[k]) <= sat_tol),
            direction=int(np.sign(f[k])),
            degenerate=degenerate,
        ))
    return out


def group_connectivity(graph: MarketGraph, groups: PriceGroupReport) -> list[bool]:
    """Whether each price group induces a connected subgraph."""
    out = []
    for members in groups.groups:
        inside = set(members)
        seen = {members[0]}
        queue = deque([members[0]])
        while queue:
            u = queue.popleft()
            for a, b, _ in graph.lines:
                for x, y in ((a, b), (b, a)):
                    if x == u and y in inside and y not in seen:
                        seen.add(y)
                        queue.append(y)
        out.append(seen == inside)
    return out
