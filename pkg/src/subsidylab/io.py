"""JSON schemas for games, schemes, graphs and set-cover instances."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import GameError
from .game import (
    CostSharingGame,
    CsgSubsidy,
    MaintenanceGame,
    MaintenanceSubsidy,
    SystemFunction,
)


def _read(source):
    if isinstance(source, dict):
        return source
    try:
        text = Path(source).read_text()
    except OSError as exc:
        raise GameError(f"cannot read {source}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameError(f"{source}: invalid JSON ({exc})") from exc


def _require(doc, key, kind=None):
    if not isinstance(doc, dict) or key not in doc:
        raise GameError(f"missing field {key!r}")
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise GameError(f"field {key!r} has the wrong type")
    return value


def parse_system_function(n: int, doc) -> SystemFunction:
    kind = _require(doc, "kind", str)
    if kind == "cnf":
        clauses = _require(doc, "clauses", list)
        if not all(isinstance(c, list) for c in clauses):
            raise GameError("clauses must be lists of literals")
        return SystemFunction.cnf(n, clauses)
    if kind == "sp":
        return SystemFunction.sp(n, _require(doc, "tree"))
    if kind == "table":
        return SystemFunction.table(n, _require(doc, "values", list))
    raise GameError(f"unknown phi kind {kind!r}")


def parse_game(doc):
    doc = _read(doc)
    kind = _require(doc, "type", str)
    try:
        if kind == "maintenance":
            n = _require(doc, "n", int)
            phi = parse_system_function(n, _require(doc, "phi", dict))
            return MaintenanceGame(
                _require(doc, "costs", list), _require(doc, "p", list), phi, float(doc.get("H", 1.0))
            )
        if kind == "cost_sharing":
            agents = _require(doc, "agents", int)
            actions = _require(doc, "actions", list)
            ids = [str(_require(a, "id")) for a in actions]
            avail = [_require(a, "avail", list) for a in actions]
            worlds = []
            for w in _require(doc, "worlds", list):
                costs = _require(w, "costs", dict)
                missing = [a for a in ids if a not in costs]
                if missing:
                    raise GameError(f"world does not price actions {missing}")
                worlds.append((float(_require(w, "prob")), [float(costs[a]) for a in ids]))
            bound = doc.get("H")
            return CostSharingGame(agents, tuple(ids), tuple(avail), tuple(worlds), None if bound is None else float(bound))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, GameError):
            raise
        raise GameError(str(exc)) from exc
    raise GameError(f"unknown game type {kind!r}")


def load_game(path):
    return parse_game(path)


def parse_scheme(doc, game):
    doc = _read(doc)
    if isinstance(game, CostSharingGame):
        scheme = CsgSubsidy.from_dict(game, _require(doc, "budget", dict))
    else:
        mode = _require(doc, "mode", str)
        if mode == "uniform":
            scheme = MaintenanceSubsidy.uniform(game.n, float(_require(doc, "sigma")))
        elif mode == "per_agent":
            scheme = MaintenanceSubsidy.per_agent(_require(doc, "sigma", list))
        elif mode == "conditional":
            scheme = MaintenanceSubsidy.conditional(
                _require(doc, "prior", list), _require(doc, "post1", list), _require(doc, "post0", list)
            )
        else:
            raise GameError(f"unknown subsidy mode {mode!r}")
    scheme.check(game)
    return scheme


def parse_graph(source):
    """Graph from a JSON document or from whitespace-separated edge-list text.

    Edge-list text holds one ``u v`` pair per line; an optional first line with
    a single integer gives the vertex count.
    """
    from .reductions import Graph

    if isinstance(source, dict):
        return Graph(_require(source, "n", int), [tuple(e) for e in _require(source, "edges", list)])
    text = Path(source).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = None
    if isinstance(doc, dict):
        return parse_graph(doc)
    rows = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    n = None
    if rows and len(rows[0]) == 1:
        n = int(rows.pop(0)[0])
    try:
        edges = [(int(r[0]), int(r[1])) for r in rows]
    except (ValueError, IndexError) as exc:
        raise GameError(f"bad edge list: {exc}") from exc
    if n is None:
        n = 1 + max((max(e) for e in edges), default=-1)
    return Graph(n, edges)


def parse_set_cover(source):
    from .reductions import SetCoverInstance

    doc = _read(source)
    return SetCoverInstance(_require(doc, "n", int), [list(s) for s in _require(doc, "sets", list)], _require(doc, "k", int))


def _round(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v) or math.isinf(v):
            return None
        r = float(f"{v:.12g}")
        return 0.0 if r == 0 else r
    if isinstance(value, dict):
        return {str(k): _round(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_round(v) for v in value.tolist()]
    return value


def canonical_json(doc, indent=None) -> str:
    """Deterministic JSON: sorted keys and floats rounded to 12 significant digits."""
    return json.dumps(_round(doc), sort_keys=True, indent=indent, separators=(",", ":") if indent is None else None)
