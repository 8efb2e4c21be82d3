"""Planner objectives: price of anarchy under subsidy, value of information and
whether the system is guaranteed to work."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import config
from .equilibrium import NashSet, enumerate_nash, opt_cost, state_costs, subsidy_paid
from .errors import GameError, UndefinedMetric
from .game import CostSharingGame, MaintenanceGame


def _worst_ne_cost(game, scheme, posterior=None, nash=None) -> float:
    """Worst equilibrium cost, computed from the subsidized side and checked
    against the unsubsidized side."""
    if nash is None:
        nash = enumerate_nash(game, scheme, posterior)
    if not len(nash):
        raise UndefinedMetric("undefined-denominator: the equilibrium set is empty")
    subsidized = state_costs(game, nash, scheme, posterior).sum(axis=1) + subsidy_paid(game, nash, scheme, posterior)
    plain = game.social_costs(posterior)[nash.indices]
    if np.max(np.abs(subsidized - plain)) > 1e-9 * max(1.0, float(np.max(np.abs(plain)))):
        raise AssertionError("accounting identity violated")
    return float(np.max(subsidized))


def poa(game, scheme=None) -> float:
    value, _ = opt_cost(game)
    if abs(value) <= config.TOL:
        raise UndefinedMetric("undefined-denominator: optimal social cost is zero")
    return _worst_ne_cost(game, scheme) / value


def poa_tilde(game, scheme=None) -> float:
    base = enumerate_nash(game)
    if not len(base):
        raise UndefinedMetric("undefined-denominator: the unsubsidized equilibrium set is empty")
    best = float(np.min(game.social_costs()[base.indices]))
    if abs(best) <= config.TOL:
        raise UndefinedMetric("undefined-denominator: best unsubsidized equilibrium cost is zero")
    return _worst_ne_cost(game, scheme) / best


def achieves_optimum(game, scheme=None, tol: float | None = None) -> bool:
    """Whether every equilibrium is socially optimal, i.e. the price of anarchy
    equals one. Unlike ``poa`` this is defined when the optimum costs zero."""
    tol = config.TOL if tol is None else tol
    value, _ = opt_cost(game)
    return _worst_ne_cost(game, scheme) <= value + tol * max(1.0, abs(value))


def system_functions_in_all_ne(game: MaintenanceGame, scheme=None, nash: NashSet | None = None) -> bool:
    """True when the system works in every equilibrium for every component
    realization the prior allows."""
    if nash is None:
        nash = enumerate_nash(game, scheme)
    if not len(nash):
        raise UndefinedMetric("the equilibrium set is empty")
    worst = game.support_table()
    return bool(np.all(worst[nash.indices] >= 1.0 - config.TOL))


@dataclass
class VoiReport:
    worst: np.ndarray
    expected: np.ndarray
    witnesses: list
    selection: str
    branches: list = field(default_factory=list)

    def to_json(self, game) -> dict:
        def label(state):
            if isinstance(game, MaintenanceGame):
                return int(state)
            return [game.actions[a] for a in state]

        return {
            "worst_voi": [float(v) for v in self.worst],
            "expected_voi": [float(v) for v in self.expected],
            "selection": self.selection,
            "branches": [{"outcome": o, "prob": float(p), "ne": [label(s) for s in ne]} for o, p, ne in self.branches],
            "witnesses": [
                {"agent": i, "prior_ne": label(s), "posterior_ne": label(t), "outcome": o}
                for i, (s, t, o) in enumerate(self.witnesses)
            ],
        }


def _voi(game, prior_ne, prior_costs, branches, selection) -> VoiReport:
    """Combine prior and per-branch equilibrium costs into a report.

    ``branches`` holds ``(outcome, prob, posterior, nash, costs)``; ``costs``
    rows follow the branch's equilibria.
    """
    n = prior_costs.shape[1]
    worst = np.full(n, np.inf)
    witnesses = [None] * n
    for outcome, _, _, nash, costs in branches:
        for i in range(n):
            # min over pairs of prior minus posterior = min prior - max posterior
            a = int(np.argmin(prior_costs[:, i]))
            b = int(np.argmax(costs[:, i]))
            v = prior_costs[a, i] - costs[b, i]
            if v < worst[i] - config.TOL:
                worst[i] = v
                witnesses[i] = (prior_ne.states[a], nash.states[b], outcome)
    expected = np.zeros(n)
    if selection == "worst":
        expected += prior_costs.min(axis=0)
        for _, prob, _, _, costs in branches:
            expected -= prob * costs.max(axis=0)
    elif selection == "min_social":
        pick = int(np.argmin(game.social_costs()[prior_ne.indices]))
        expected += prior_costs[pick]
        for _, prob, post, nash, costs in branches:
            k = int(np.argmin(game.social_costs(post)[nash.indices]))
            expected -= prob * costs[k]
    else:
        raise GameError(f"unknown selection rule {selection!r}")
    listed = [(o, p, list(nash.states)) for o, p, _, nash, _ in branches]
    return VoiReport(worst, expected, witnesses, selection, listed)


def voi_report(game: MaintenanceGame, scheme=None, inspected: int = 0, selection: str = "worst") -> VoiReport:
    """Value of inspecting component ``inspected`` for every agent.

    The worst case ranges over all prior equilibria, positive-probability
    outcomes and posterior equilibria. The expected value weights outcome 1 by
    ``p_j`` and outcome 0 by ``1 - p_j``; with ``selection="worst"`` each agent
    faces its worst equilibrium in every game, with ``"min_social"`` one
    minimum-social-cost equilibrium is fixed per game.
    """
    if not 0 <= inspected < game.n:
        raise GameError(f"inspected component {inspected} out of range")
    prior_ne = enumerate_nash(game, scheme)
    if not len(prior_ne):
        raise UndefinedMetric("the prior equilibrium set is empty")
    prior_costs = state_costs(game, prior_ne, scheme)
    pj = float(game.p[inspected])
    branches = []
    for y, prob in ((1, pj), (0, 1.0 - pj)):
        if prob <= 0:
            continue
        post = (inspected, y)
        nash = enumerate_nash(game, scheme, post)
        if not len(nash):
            raise UndefinedMetric(f"the posterior equilibrium set for outcome {y} is empty")
        branches.append((y, prob, post, nash, state_costs(game, nash, scheme, post)))
    return _voi(game, prior_ne, prior_costs, branches, selection)


def csg_voi_report(game: CostSharingGame, scheme=None, inspected=0, selection: str = "worst") -> VoiReport:
    """Value of learning the cost of action ``inspected``; every distinct world
    value of that cost is one posterior branch."""
    j = game.action_index(inspected)
    prior_ne = enumerate_nash(game, scheme)
    if not len(prior_ne):
        raise UndefinedMetric("the prior equilibrium set is empty")
    prior_costs = state_costs(game, prior_ne, scheme)
    branches = []
    for value, prob in game.branches(j):
        post = (j, value)
        nash = enumerate_nash(game, scheme, post)
        if not len(nash):
            raise UndefinedMetric(f"the posterior equilibrium set for cost {value} is empty")
        branches.append((value, prob, post, nash, state_costs(game, nash, scheme, post)))
    return _voi(game, prior_ne, prior_costs, branches, selection)


def analysis_report(game, scheme=None, inspected=None, selection: str = "worst") -> dict:
    """Everything the ``analyze`` command prints, as a JSON-ready dict."""
    nash = enumerate_nash(game, scheme)
    value, argmin = opt_cost(game)
    report = {
        "type": "maintenance" if isinstance(game, MaintenanceGame) else "cost_sharing",
        "ne": nash.to_json(),
        "ne_labels": nash.labels(),
        "opt": {"value": value, "state": argmin if isinstance(game, MaintenanceGame) else [game.actions[a] for a in argmin]},
        "poa": poa(game, scheme),
        "poa_tilde": poa_tilde(game, scheme),
        "worst_ne_cost": _worst_ne_cost(game, scheme, nash=nash),
    }
    if isinstance(game, MaintenanceGame):
        report["system_functions_in_all_ne"] = system_functions_in_all_ne(game, scheme, nash)
        if inspected is not None:
            report.update(voi_report(game, scheme, inspected, selection).to_json(game))
    elif inspected is not None:
        report.update(csg_voi_report(game, scheme, inspected, selection).to_json(game))
    return report
