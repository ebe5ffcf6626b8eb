"""JSON game configs and equilibrium artifacts.

A config names markets, lines and producers by id; ids may be strings or
integers and are mapped to 0-based indices in file order. Artifacts embed the
config they were solved from so that analysis can rebuild the game.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import __version__
from .game import AffinePrice, GameInstance, QuadraticCost, check_cost, check_price
from .network import MarketGraph, ProducerMap, ValidationError, validate
from .solver import Equilibrium, SolverOptions

SCHEMA_VERSION = 1
ARTIFACT_VERSION = 1

_ID = {"type": ["string", "integer"]}
_NUM = {"type": "number"}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["markets", "lines", "producers"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "description": {"type": "string"},
        "markets": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "price"],
                "additionalProperties": False,
                "properties": {
                    "id": _ID,
                    "name": {"type": "string"},
                    "price": {
                        "type": "object",
                        "required": ["alpha", "beta"],
                        "additionalProperties": False,
                        "properties": {"alpha": _NUM, "beta": _NUM},
                    },
                },
            },
        },
        "lines": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["from", "to", "capacity"],
                "additionalProperties": False,
                "properties": {"id": _ID, "from": _ID, "to": _ID, "capacity": _NUM},
            },
        },
        "producers": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "market", "cost"],
                "additionalProperties": False,
                "properties": {
                    "id": _ID,
                    "market": _ID,
                    "cost": {
                        "type": "object",
                        "required": ["theta"],
                        "additionalProperties": False,
                        "properties": {"theta": _NUM},
                    },
                },
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iters": {"type": "integer", "minimum": 1},
                "seed": {"type": ["integer", "null"]},
            },
        },
    },
}


class ConfigError(ValueError):
    """Input problem with a config or artifact; ``path`` names the offending field."""

    category = "input"

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class MissingFileError(ConfigError):
    category = "missing-file"


class SchemaError(ConfigError):
    category = "schema"


class DanglingIdError(ConfigError):
    category = "dangling-id"


class ModelError(ConfigError):
    """Model parameter or network rule violation."""

    category = "model"


@dataclass
class LoadedConfig:
    game: GameInstance
    options: SolverOptions
    market_ids: list
    line_ids: list
    producer_ids: list
    raw: dict


def _fmt_path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def bundled_path(name: str) -> Path | None:
    """Path of a fixture shipped with the package, or None."""
    ref = resources.files("netcournot") / "data" / name
    return Path(str(ref)) if ref.is_file() else None


def resolve_config_path(path) -> Path:
    """``path`` itself if it exists, else a bundled fixture of the same file name."""
    path = Path(path)
    if path.is_file():
        return path
    if path.parent.name in ("examples", "data", ""):
        bundled = bundled_path(path.name)
        if bundled is not None:
            return bundled
    raise MissingFileError(f"config file not found: {path}")


def _read_json(path: Path) -> Any:
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise MissingFileError(f"file not found: {path}") from None
    except UnicodeDecodeError as e:
        raise SchemaError(f"file is not UTF-8: {e}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from None


def parse_config(data: Any) -> LoadedConfig:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        err = errors[0]
        raise SchemaError(err.message, _fmt_path(err.absolute_path) or "$")

    market_ids = [mk["id"] for mk in data["markets"]]
    index: dict = {}
    for k, mid in enumerate(market_ids):
        if mid in index:
            raise SchemaError(f"duplicate market id {mid!r}", f"markets[{k}].id")
        index[mid] = k
    producer_ids = [p["id"] for p in data["producers"]]
    if len(set(producer_ids)) != len(producer_ids):
        k = next(k for k, pid in enumerate(producer_ids) if producer_ids.index(pid) != k)
        raise SchemaError(f"duplicate producer id {producer_ids[k]!r}", f"producers[{k}].id")
    line_ids = [ln.get("id", k + 1) for k, ln in enumerate(data["lines"])]
    if len(set(line_ids)) != len(line_ids):
        k = next(k for k, lid in enumerate(line_ids) if line_ids.index(lid) != k)
        raise SchemaError(f"duplicate line id {line_ids[k]!r}", f"lines[{k}].id")

    lines = []
    for k, ln in enumerate(data["lines"]):
        for key in ("from", "to"):
            if ln[key] not in index:
                raise DanglingIdError(f"unknown market id {ln[key]!r}", f"lines[{k}].{key}")
        if ln["from"] == ln["to"]:
            raise ModelError("line connects a market to itself", f"lines[{k}]")
        cap = ln["capacity"]
        if not (np.isfinite(cap) and cap >= 0):
            raise ModelError(f"capacity must be finite and nonnegative, got {cap!r}", f"lines[{k}].capacity")
        lines.append((index[ln["from"]], index[ln["to"]], float(cap)))
    assignment = []
    for i, p in enumerate(data["producers"]):
        if p["market"] not in index:
            raise DanglingIdError(f"unknown market id {p['market']!r}", f"producers[{i}].market")
        assignment.append(index[p["market"]])

    prices = []
    for k, mk in enumerate(data["markets"]):
        price = AffinePrice(float(mk["price"]["alpha"]), float(mk["price"]["beta"]))
        problems = check_price(price)
        if problems:
            field = "beta" if "beta" in problems[0] else "alpha"
            raise ModelError(problems[0], f"markets[{k}].price.{field}")
        prices.append(price)
    costs = []
    for i, p in enumerate(data["producers"]):
        cost = QuadraticCost(float(p["cost"]["theta"]))
        problems = check_cost(cost)
        if problems:
            raise ModelError(problems[0], f"producers[{i}].cost.theta")
        costs.append(cost)

    graph = MarketGraph.from_lines(len(market_ids), lines)
    pmap = ProducerMap(tuple(assignment))
    report = validate(graph, pmap)
    if not report.passed:
        raise ModelError("; ".join(report.messages), "lines")
    try:
        game = GameInstance(graph, pmap, tuple(prices), tuple(costs), names={"markets": market_ids})
    except ValidationError as e:
        raise ModelError(str(e)) from None

    solver = data.get("solver", {})
    options = SolverOptions(
        tol=float(solver.get("tol", SolverOptions.tol)),
        max_iters=int(solver.get("max_iters", SolverOptions.max_iters)),
        seed=solver.get("seed"),
    )
    return LoadedConfig(game, options, market_ids, line_ids, producer_ids, data)


def load_config(path) -> tuple[GameInstance, SolverOptions]:
    """Parse, schema-check and validate a game config file."""
    loaded = load_config_full(path)
    return loaded.game, loaded.options


def load_config_full(path) -> LoadedConfig:
    return parse_config(_read_json(resolve_config_path(path)))


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _floats(x) -> list[float]:
    return [float(v) for v in np.asarray(x, dtype=float).reshape(-1)]


def build_artifact(
    loaded: LoadedConfig,
    eq: Equilibrium,
    options: SolverOptions,
    kkt=None,
    theorem2=None,
    wall_time: float | None = None,
) -> dict:
    art = {
        "artifact_version": ARTIFACT_VERSION,
        "tool_version": __version__,
        "config": loaded.raw,
        "method": eq.method,
        "solution": {
            "q": _floats(eq.q),
            "f": _floats(eq.f),
            "d": _floats(eq.d),
            "p": _floats(eq.p),
            "potential": None if eq.potential is None else float(eq.potential),
        },
        "solver": {
            "converged": bool(eq.converged),
            "iterations": int(eq.iterations),
            "residual": float(eq.residual),
            "tol": float(options.tol),
            "max_iters": int(options.max_iters),
            "seed": options.seed,
            "wall_time_s": wall_time,
        },
        "kkt": None,
        "theorem2": None,
    }
    if kkt is not None:
        art["kkt"] = {
            "tol": float(kkt.tol),
            "max_residual": kkt.max_residual,
            "passed": kkt.passed,
        }
    if theorem2 is not None:
        ids = loaded.market_ids
        art["theorem2"] = {
            "passed": theorem2.passed,
            "mean_price": theorem2.prices.mean_price,
            "groups": [
                {"price": price, "markets": [ids[j] for j in members]}
                for price, members in zip(theorem2.prices.group_prices, theorem2.prices.groups)
            ],
            "pairs_checked": len(theorem2.pairs),
            "violations": [[ids[h], ids[j]] for h, j in theorem2.violations],
        }
    return art


def dumps_artifact(art: dict) -> str:
    return json.dumps(art, indent=2, allow_nan=False) + "\n"


def write_artifact(path, art: dict) -> None:
    atomic_write_text(path, dumps_artifact(art))


def read_artifact(path) -> tuple[dict, LoadedConfig, Equilibrium]:
    """Load an artifact and rebuild its game and equilibrium."""
    data = _read_json(Path(path))
    try:
        if data.get("artifact_version") != ARTIFACT_VERSION:
            raise SchemaError(f"unsupported artifact version {data.get('artifact_version')!r}", "artifact_version")
        loaded = parse_config(data["config"])
        sol = data["solution"]
        game = loaded.game
        q = np.array(sol["q"], dtype=float)
        f = np.array(sol["f"], dtype=float)
        if q.shape != (game.n,) or f.shape != (game.l,):
            raise SchemaError("solution vectors do not match the config dimensions", "solution")
        solver = data["solver"]
        eq = Equilibrium(
            q=q,
            f=f,
            d=np.array(sol["d"], dtype=float),
            p=np.array(sol["p"], dtype=float),
            potential=sol.get("potential"),
            iterations=int(solver["iterations"]),
            converged=bool(solver["converged"]),
            residual=float(solver["residual"]),
            method=data.get("method", "potential"),
        )
    except (KeyError, TypeError, AttributeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise SchemaError(f"malformed artifact: {e!r}") from None
    return data, loaded, eq
