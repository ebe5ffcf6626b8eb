"""CSV tables, certificate listings and DOT graphs for a solved game."""

from __future__ import annotations

import csv
import io

from .analysis import LineRecord, PriceGroupReport, Theorem2Report

# one color per price group, most expensive group first
PALETTE = (
    "#e41a1c", "#ff7f00", "#4daf4a", "#377eb8", "#984ea3",
    "#a65628", "#f781bf", "#999999", "#ffff33", "#1b9e77",
)


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\r\n").writerows(rows)
    return buf.getvalue()


def _num(x: float) -> str:
    return repr(float(x))


def price_groups_csv(groups: PriceGroupReport, market_ids) -> str:
    rows = [["group_price_eur_mwh", "market_ids"]]
    for price, members in zip(groups.group_prices, groups.groups):
        rows.append([_num(price), ",".join(str(market_ids[j]) for j in members)])
    return _csv(rows)


def flows_csv(records: list[LineRecord], market_ids, line_ids) -> str:
    rows = [["line_id", "from", "to", "flow_mw", "capacity_mw", "utilization", "saturated"]]
    for r in records:
        rows.append([
            str(line_ids[r.line]),
            str(market_ids[r.tail]),
            str(market_ids[r.head]),
            _num(r.flow),
            _num(r.capacity),
            _num(r.utilization),
            "true" if r.saturated else "false",
        ])
    return _csv(rows)


def certificates_text(report: Theorem2Report, prices, market_ids, line_ids) -> str:
    ids = market_ids
    lines = [
        f"mean price: {report.prices.mean_price!r} EUR/MWh",
        f"price groups: {len(report.prices.groups)}",
        f"pairs with p_h < mean < p_j: {len(report.pairs)}",
        f"result: {'PASS' if report.passed else 'FAIL'}",
        "",
    ]
    for pr in report.pairs:
        head = f"pair {ids[pr.h]} (p={prices[pr.h]:.6g}) -> {ids[pr.j]} (p={prices[pr.j]:.6g}):"
        cert = pr.certificate
        if cert is None:
            lines.append(f"{head} NO SATURATED CUT")
            continue
        members = ",".join(str(ids[u]) for u in sorted(cert.U))
        lines.append(f"{head} cut U={{{members}}}")
        for x in cert.crossing:
            arrow = "out" if x.outward else "in"
            state = "saturated" if x.saturated else "NOT saturated"
            lines.append(
                f"  line {line_ids[x.line]} {ids[x.tail]}->{ids[x.head]} ({arrow}) "
                f"flow {x.flow!r} / capacity {x.capacity!r} {state}"
            )
    strict_bad = [(p.h, p.j) for p in report.strict_pairs if p.violated]
    lines.append("")
    lines.append(
        f"all price-discordant pairs: {len(report.strict_pairs)} checked, {len(strict_bad)} without a cut"
    )
    for h, j in strict_bad:
        lines.append(f"  {ids[h]} -> {ids[j]}")
    return "\n".join(lines) + "\n"


def _quote(s) -> str:
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(prices, groups: PriceGroupReport, records: list[LineRecord], market_ids) -> str:
    color = {}
    for rank, members in enumerate(groups.groups):
        for j in members:
            color[j] = PALETTE[rank % len(PALETTE)]
    out = [
        "digraph equilibrium {",
        "  node [shape=circle, style=filled, fontname=Helvetica];",
        "  edge [fontname=Helvetica];",
    ]
    for j, mid in enumerate(market_ids):
        label = f"{mid}\\np={prices[j]:.4g}"
        out.append(f"  {_quote(mid)} [label=\"{label}\", fillcolor=\"{color[j]}\"];")
    for r in records:
        a, b = market_ids[r.source], market_ids[r.target]
        attrs = [f"label=\"{abs(r.flow):.6g}/{r.capacity:.6g}\""]
        if r.direction == 0:
            attrs.append("dir=none")
        if r.saturated:
            attrs.append("style=bold, penwidth=3")
        out.append(f"  {_quote(a)} -> {_quote(b)} [{', '.join(attrs)}];")
    out.append("}")
    return "\n".join(out) + "\n"
