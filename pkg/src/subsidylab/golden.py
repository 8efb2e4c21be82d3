"""Bundled worked examples and their published cost tables, recomputed on demand."""
from __future__ import annotations

import json
import time
from importlib import resources

import numpy as np

from .equilibrium import enumerate_nash
from .game import CsgSubsidy, MaintenanceSubsidy, agent_cost, csg_cost
from .io import parse_game

GOLDEN_TOL = 1e-9

FIXTURES = {
    "symmetric_series": "series2_symmetric.json",
    "inspection_series": "series2_inspection.json",
    "commute": "commute_sharing.json",
}

# (condition, posterior) -> {state label: (agent 1 cost, agent 2 cost)}
EXPECTED = {
    "symmetric_series": {
        "prior": (None, {"DN-DN": (0.75, 0.75), "DN-RE": (0.5, 0.8), "RE-DN": (0.8, 0.5), "RE-RE": (0.3, 0.3)}),
    },
    "inspection_series": {
        "prior": (None, {"DN-DN": (0.96, 0.96), "DN-RE": (0.6, 0.9), "RE-DN": (1.2, 0.9), "RE-RE": (0.3, 0.3)}),
        "y1=1": ((0, 1), {"DN-DN": (0.9, 0.9), "DN-RE": (0.0, 0.3), "RE-DN": (1.2, 0.9), "RE-RE": (0.3, 0.3)}),
        "y1=0": ((0, 0), {"DN-DN": (1.0, 1.0), "DN-RE": (1.0, 1.3), "RE-DN": (1.2, 0.9), "RE-RE": (0.3, 0.3)}),
    },
    "commute": {
        "prior": (None, {
            "A,A": (2.5, 2.5), "A,B": (5, 4), "A,C": (5, 4),
            "D,A": (4, 5), "D,B": (4, 4), "D,C": (4, 4),
        }),
        # world w1 is the one where B is cheap, so revealing B's cost identifies it
        "w1": (("B", 2.0), {
            "A,A": (2.5, 2.5), "A,B": (5, 2), "A,C": (5, 6),
            "D,A": (4, 5), "D,B": (4, 2), "D,C": (4, 6),
        }),
        "w2": (("B", 6.0), {
            "A,A": (2.5, 2.5), "A,B": (5, 6), "A,C": (5, 2),
            "D,A": (4, 5), "D,B": (4, 6), "D,C": (4, 2),
        }),
    },
}


def load_fixture(name: str):
    """Game object for one of the bundled examples."""
    text = resources.files("subsidylab").joinpath("data", FIXTURES[name]).read_text()
    return parse_game(json.loads(text))


def _word(label: str) -> int:
    return sum(1 << i for i, a in enumerate(label.split("-")) if a == "RE")


def _cells(name, game):
    out = []
    for cond, (post, table) in EXPECTED[name].items():
        for label, want in table.items():
            if name == "commute":
                got = csg_cost(game, label.split(","), None, post)
            else:
                got = agent_cost(game, _word(label), None, post)
            for agent, (w, g) in enumerate(zip(want, got)):
                out.append({
                    "table": name,
                    "condition": cond,
                    "state": label,
                    "agent": agent + 1,
                    "expected": float(w),
                    "got": float(g),
                    "ok": abs(float(w) - float(g)) <= GOLDEN_TOL,
                })
    return out


def _claims(games) -> list:
    from .metrics import csg_voi_report, poa, voi_report
    from .solvers import two_series_poa_subsidy

    sym, insp, comm = games["symmetric_series"], games["inspection_series"], games["commute"]
    claims = []

    def claim(text, ok):
        claims.append({"claim": text, "ok": bool(ok)})

    ne = enumerate_nash(sym)
    claim("symmetric series: equilibria are DN-DN and RE-RE", ne.labels() == ["DN-DN", "RE-RE"])
    claim("symmetric series: price of anarchy 2.5", abs(poa(sym) - 2.5) <= GOLDEN_TOL)
    s = MaintenanceSubsidy.uniform(2, 0.06)
    claim("symmetric series: uniform 0.06 leaves RE-RE alone", enumerate_nash(sym, s).labels() == ["RE-RE"])
    claim("symmetric series: uniform 0.06 gives PoA 1", abs(poa(sym, s) - 1.0) <= GOLDEN_TOL)
    p1, p2 = sym.p
    c1, c2 = sym.costs
    claim("symmetric series: least PoA subsidy 0.05", abs(two_series_poa_subsidy(p1, p2, c1, c2) - 0.05) <= GOLDEN_TOL)

    r = voi_report(insp, None, 0)
    claim("inspection series: worst VoI -0.7 for both agents", np.allclose(r.worst, [-0.7, -0.7], atol=GOLDEN_TOL, rtol=0))
    claim("inspection series: expected VoI (-0.3, -0.42)", np.allclose(r.expected, [-0.3, -0.42], atol=GOLDEN_TOL, rtol=0))
    cond = MaintenanceSubsidy.conditional([0, 0], [0, 0], [0.21, 0])
    r = voi_report(insp, cond, 0)
    claim("inspection series: 0.21 to agent 1 on y1=0 removes negative VoI", bool(np.all(r.worst >= -GOLDEN_TOL)))
    claim("inspection series: the same subsidy keeps expected VoI nonnegative", bool(np.all(r.expected >= -GOLDEN_TOL)))

    prior = enumerate_nash(comm)
    claim("commute: (A,A) is a prior equilibrium", ("A", "A") in prior)
    w1 = enumerate_nash(comm, None, ("B", 2.0))
    claim("commute: (D,B) is the only equilibrium in w1", w1.to_json() == [["D", "B"]])
    w2 = enumerate_nash(comm, None, ("B", 6.0))
    claim("commute: (D,C) is the only equilibrium in w2", w2.to_json() == [["D", "C"]])
    r = csg_voi_report(comm, None, "B")
    claim("commute: agent 1 worst VoI -1.5", abs(r.worst[0] + 1.5) <= GOLDEN_TOL)
    r = csg_voi_report(comm, CsgSubsidy.from_dict(comm, {"A": 3.01}), "B")
    claim("commute: budget 3.01 on A removes negative VoI", bool(np.all(r.worst >= -GOLDEN_TOL)))
    return claims


def run_golden() -> dict:
    """Recompute every table cell and worked claim; ``passed`` is the conjunction."""
    t0 = time.perf_counter()
    games = {name: load_fixture(name) for name in FIXTURES}
    cells = []
    for name, game in games.items():
        cells.extend(_cells(name, game))
    claims = _claims(games)
    passed = all(c["ok"] for c in cells) and all(c["ok"] for c in claims)
    counts = {name: sum(1 for c in cells if c["table"] == name) for name in FIXTURES}
    return {
        "passed": passed,
        "cells": cells,
        "claims": claims,
        "counts": counts,
        "seconds": time.perf_counter() - t0,
    }
