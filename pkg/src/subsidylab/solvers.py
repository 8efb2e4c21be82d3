"""Optimal-subsidy computation.

Closed forms cover the two-agent series game. Everything else is searched
exactly: uniform subsidies by scanning the pieces between critical values,
per-agent subsidies by enumerating the cells those thresholds cut out of the
subsidy space.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import config, kernels
from .config import SMALL_CAP, margin_for
from .errors import CapExceeded, GameError, UndefinedMetric
from .game import CostSharingGame, CsgSubsidy, MaintenanceGame, MaintenanceSubsidy
from .metrics import (
    achieves_optimum,
    csg_voi_report,
    poa,
    system_functions_in_all_ne,
    voi_report,
)

OBJECTIVES = ("poa1", "system", "voi")
UNIFORM_MODES = ("uniform", "conditional-y0", "conditional-y1", "conditional")


@dataclass(frozen=True)
class CriticalValueSet:
    per_agent: tuple
    merged: np.ndarray

    def __len__(self):
        return len(self.merged)


def _dedupe(values, tol=None) -> np.ndarray:
    tol = config.TOL if tol is None else tol
    values = np.sort(np.asarray(values, dtype=np.float64))
    if not len(values):
        return values
    keep = np.concatenate([[True], np.diff(values) > tol])
    return values[keep]


def agent_thresholds(game: MaintenanceGame, agent: int, posterior=None, tol: float | None = None) -> np.ndarray:
    """Subsidy levels above which ``agent`` strictly prefers to repair, one per
    opponent profile; only positive levels are kept."""
    tol = config.TOL if tol is None else tol
    phi = game.table(posterior)
    words = np.arange(1 << game.n)
    bit = 1 << agent
    base = words[(words & bit) == 0]
    vals = game.costs[agent] + phi[base] - phi[base | bit]
    return _dedupe(vals[vals > tol], tol)


def critical_values(game: MaintenanceGame, mode: str = "uniform", posterior=None, tol: float | None = None) -> CriticalValueSet:
    tol = config.TOL if tol is None else tol
    if mode not in ("uniform", "per_agent"):
        raise GameError(f"unknown critical-value mode {mode!r}")
    per = tuple(agent_thresholds(game, i, posterior, tol) for i in range(game.n))
    merged = _dedupe(np.concatenate(per) if per else np.zeros(0), tol)
    return CriticalValueSet(per, merged)


# ---------------------------------------------------------------------------
# two-agent series closed forms


def _check_two_series(p1, p2, C1, C2):
    if not (0 < p1 < 1 and 0 < p2 < 1):
        raise GameError("working probabilities must lie strictly between 0 and 1")
    if not (C1 > 0 and C2 > 0):
        raise GameError("repair costs must be positive")


def two_series_poa_subsidy(p1: float, p2: float, C1: float, C2: float) -> float:
    """Least total subsidy beyond which every equilibrium is as good as the best
    unsubsidized one, for two components in series."""
    _check_two_series(p1, p2, C1, C2)
    q1, q2 = 1 - p1, 1 - p2
    inside = q1 * p2 <= C1 <= q1 and q2 * p1 <= C2 <= q2
    return min(C1 - q1 * p2, C2 - q2 * p1) if inside else 0.0


def two_series_system_subsidy(p1: float, p2: float, C1: float, C2: float) -> float:
    """Least total subsidy beyond which the series system works in every equilibrium.

    The cost pairs that need no help form two boxes anchored at the origin, so
    the answer is the smaller L1 distance from ``(C1, C2)`` to either box.
    """
    _check_two_series(p1, p2, C1, C2)
    q1, q2 = 1 - p1, 1 - p2
    boxes = ((q1 * p2, q2), (q1, q2 * p1))
    return min(max(C1 - a, 0.0) + max(C2 - b, 0.0) for a, b in boxes)


# ---------------------------------------------------------------------------
# objectives


def objective_holds(game, scheme, objective: str, inspected=0) -> bool:
    if objective == "poa1":
        return achieves_optimum(game, scheme)
    if objective == "system":
        if not isinstance(game, MaintenanceGame):
            raise GameError("the system objective applies to maintenance games only")
        return system_functions_in_all_ne(game, scheme)
    if objective == "voi":
        if isinstance(game, MaintenanceGame):
            report = voi_report(game, scheme, inspected)
        else:
            report = csg_voi_report(game, scheme, inspected)
        return bool(np.all(report.worst >= -config.TOL))
    raise GameError(f"unknown objective {objective!r}")


def objective_report(game, scheme, objective: str, inspected=0) -> dict:
    out = {"objective": objective, "holds": objective_holds(game, scheme, objective, inspected)}
    try:
        out["poa"] = poa(game, scheme)
    except UndefinedMetric as exc:
        out["poa"] = None
        out["poa_note"] = str(exc)
    if isinstance(game, MaintenanceGame):
        out["system_functions_in_all_ne"] = system_functions_in_all_ne(game, scheme)
    if objective == "voi":
        rep = voi_report(game, scheme, inspected) if isinstance(game, MaintenanceGame) else csg_voi_report(game, scheme, inspected)
        out["worst_voi"] = [float(v) for v in rep.worst]
        out["expected_voi"] = [float(v) for v in rep.expected]
    return out


def uniform_scheme(n: int, sigma: float, mode: str = "uniform") -> MaintenanceSubsidy:
    z = np.zeros(n)
    v = np.full(n, float(sigma))
    if mode == "uniform":
        return MaintenanceSubsidy.uniform(n, sigma)
    if mode == "conditional-y0":
        return MaintenanceSubsidy.conditional(z, z, v)
    if mode == "conditional-y1":
        return MaintenanceSubsidy.conditional(z, v, z)
    if mode == "conditional":
        return MaintenanceSubsidy.conditional(z, v, v)
    raise GameError(f"unknown subsidy mode {mode!r}")


def _affected_games(objective, mode, inspected):
    """Posterior tags of the games whose equilibria a subsidy of this mode can move."""
    if objective != "voi":
        return [None]
    return {
        "uniform": [None, (inspected, 1), (inspected, 0)],
        "conditional-y0": [(inspected, 0)],
        "conditional-y1": [(inspected, 1)],
        "conditional": [(inspected, 1), (inspected, 0)],
    }[mode]


@dataclass
class UniformResult:
    sigma: float | None
    feasible: bool
    report: dict
    h_binds: bool
    candidates: int

    def to_json(self, game) -> dict:
        return {
            "feasible": self.feasible,
            "sigma": self.sigma,
            "h_binds": self.h_binds,
            "candidates": self.candidates,
            "objective_report": self.report,
        }


def optimal_uniform_subsidy(
    game: MaintenanceGame,
    objective: str = "poa1",
    mode: str = "uniform",
    inspected: int = 0,
    margin: float | None = None,
    bound: float | None = None,
) -> UniformResult:
    """Least uniform subsidy in ``[0, H]`` achieving ``objective``.

    The equilibrium sets, and hence every objective, are constant strictly
    between consecutive critical values, so it is enough to probe 0 and each
    threshold plus the margin.
    """
    if objective not in OBJECTIVES:
        raise GameError(f"unknown objective {objective!r}")
    if mode not in UNIFORM_MODES:
        raise GameError(f"unknown subsidy mode {mode!r}")
    if mode != "uniform" and objective != "voi":
        raise GameError("conditional subsidies only apply to the voi objective")
    H = game.bound if bound is None else bound
    margin = margin_for(H) if margin is None else margin
    thresholds = []
    for post in _affected_games(objective, mode, inspected):
        thresholds.append(critical_values(game, posterior=post).merged)
    merged = _dedupe(np.concatenate(thresholds))
    candidates = [0.0] + [float(t + margin) for t in merged if t + margin <= H]
    h_binds = bool(np.any(merged + margin > H))
    for sigma in candidates:
        scheme = uniform_scheme(game.n, sigma, mode)
        if objective_holds(game, scheme, objective, inspected):
            return UniformResult(sigma, True, objective_report(game, scheme, objective, inspected), h_binds, len(candidates))
    return UniformResult(None, False, {"objective": objective, "holds": False, "note": "infeasible within H"}, h_binds, len(candidates))


# ---------------------------------------------------------------------------
# cell searches


@dataclass
class Decision:
    answer: bool
    witness: object = None
    total: float | None = None
    evaluated: int = 0
    h_binds: bool = False
    charge_rule: str | None = None
    notes: dict = field(default_factory=dict)

    def to_json(self, game) -> dict:
        if self.witness is None:
            witness = None
        elif isinstance(self.witness, CsgSubsidy):
            witness = self.witness.to_json(game)
        else:
            witness = self.witness.to_json()
        out = {
            "feasible": self.answer,
            "witness": witness,
            "total": self.total,
            "evaluated": self.evaluated,
            "h_binds": self.h_binds,
        }
        if self.charge_rule:
            out["charge_rule"] = self.charge_rule
        out.update(self.notes)
        return out


def _cell_representatives(thresholds, H, margin, nonzero):
    reps = [margin] if nonzero else [0.0]
    reps += [float(t + margin) for t in thresholds if t + margin <= H]
    binds = any(t + margin > H for t in thresholds)
    return _dedupe(reps, 0.0).tolist(), binds


def _optimum_batch(game: MaintenanceGame, sigmas: np.ndarray, tol=None) -> np.ndarray:
    """For each row of per-agent subsidies: is every equilibrium optimal?"""
    tol = config.TOL if tol is None else tol
    phi = game.table()
    social = game.social_costs()
    best = float(social.min())
    masks = kernels.nash_mask_batch(phi, game.costs[None, :] - sigmas, tol)
    worst = np.where(masks, social[None, :], -np.inf).max(axis=1)
    return worst <= best + tol * max(1.0, abs(best))


def _system_batch(game: MaintenanceGame, sigmas: np.ndarray, tol=None) -> np.ndarray:
    tol = config.TOL if tol is None else tol
    phi = game.table()
    support = game.support_table()
    masks = kernels.nash_mask_batch(phi, game.costs[None, :] - sigmas, tol)
    bad = masks & (support[None, :] < 1.0 - tol)
    return masks.any(axis=1) & ~bad.any(axis=1)


def min_agents_poa1(
    game: MaintenanceGame,
    n_star: int,
    cap: int = SMALL_CAP,
    margin: float | None = None,
    bound: float | None = None,
) -> Decision:
    """Can subsidizing at most ``n_star`` agents make every equilibrium optimal?

    Subsets are tried by size and then lexicographically; the subsidized agents
    range over their threshold cells (each probed just above its lower edge).
    """
    n = game.n
    if n > cap:
        raise CapExceeded(f"n={n} exceeds the exhaustive-search cap {cap}")
    H = game.bound if bound is None else bound
    margin = margin_for(H) if margin is None else margin
    reps, binds = [], False
    for i in range(n):
        r, b = _cell_representatives(agent_thresholds(game, i), H, margin, nonzero=True)
        reps.append(r)
        binds |= b
    evaluated = 0
    for size in range(0, min(n_star, n) + 1):
        for subset in itertools.combinations(range(n), size):
            grid = list(itertools.product(*(reps[i] for i in subset)))
            if len(grid) > 10**6:
                raise CapExceeded("too many subsidy cells for one agent subset")
            sig = np.zeros((len(grid), n))
            if subset:
                sig[:, list(subset)] = np.array(grid)
            ok = _optimum_batch(game, sig)
            evaluated += len(grid)
            hits = np.flatnonzero(ok)
            if len(hits):
                s = MaintenanceSubsidy.per_agent(sig[hits[0]])
                return Decision(True, s, float(sig[hits[0]].sum()), evaluated, binds)
    return Decision(False, None, None, evaluated, binds)


def _budget_cells(coords, budget, charge_groups, limit):
    """Depth-first enumeration of cell corners whose per-group sums stay within
    ``budget``; ``coords`` lists (group, candidate values)."""
    out = []
    sums = [0.0] * charge_groups
    chosen = [0.0] * len(coords)

    def walk(k):
        if k == len(coords):
            out.append(list(chosen))
            if len(out) > limit:
                raise CapExceeded(f"more than {limit} subsidy cells within budget")
            return
        group, values = coords[k]
        for v in values:
            if sums[group] + v > budget + config.TOL:
                break
            sums[group] += v
            chosen[k] = v
            walk(k + 1)
            sums[group] -= v

    if budget >= -config.TOL:
        walk(0)
    return out


def min_budget_decision(
    game: MaintenanceGame,
    objective: str,
    budget: float,
    inspected: int = 0,
    mode: str = "per_agent",
    cap: int = SMALL_CAP,
    margin: float | None = None,
    bound: float | None = None,
    limit: int = 2 * 10**6,
) -> Decision:
    """Is there a subsidy scheme of total cost at most ``budget`` achieving
    ``objective``? The witness is the cheapest one found (lexicographic ties).

    In ``conditional`` mode prior and posterior vectors are separate unknowns and
    the charge is the largest of the three totals.
    """
    n = game.n
    if n > cap:
        raise CapExceeded(f"n={n} exceeds the exhaustive-search cap {cap}")
    if objective not in OBJECTIVES:
        raise GameError(f"unknown objective {objective!r}")
    H = game.bound if bound is None else bound
    margin = margin_for(H) if margin is None else margin
    binds = False
    coords = []
    if mode == "per_agent":
        posts = _affected_games(objective, "uniform", inspected)
        for i in range(n):
            thr = _dedupe(np.concatenate([agent_thresholds(game, i, post) for post in posts]))
            r, b = _cell_representatives(thr, H, margin, nonzero=False)
            coords.append((0, r))
            binds |= b
        groups = 1
    elif mode == "conditional":
        if objective != "voi":
            raise GameError("conditional subsidies only apply to the voi objective")
        for g, post in enumerate((None, (inspected, 1), (inspected, 0))):
            for i in range(n):
                r, b = _cell_representatives(agent_thresholds(game, i, post), H, margin, nonzero=False)
                coords.append((g, r))
                binds |= b
        groups = 3
    else:
        raise GameError(f"unknown subsidy mode {mode!r}")
    cells = _budget_cells(coords, budget, groups, limit)
    if not cells:
        return Decision(False, None, None, 0, binds, "max over branches" if mode == "conditional" else None)
    arr = np.array(cells)
    if mode == "per_agent":
        totals = arr.sum(axis=1)
    else:
        totals = arr.reshape(len(arr), 3, n).sum(axis=2).max(axis=1)
    order = sorted(range(len(cells)), key=lambda r: (round(totals[r], 12), cells[r]))
    charge = "max over branches" if mode == "conditional" else None
    if mode == "per_agent" and objective in ("system", "poa1"):
        check = _system_batch if objective == "system" else _optimum_batch
        ok = check(game, arr[order])
        hits = np.flatnonzero(ok)
        if len(hits):
            r = order[hits[0]]
            return Decision(True, MaintenanceSubsidy.per_agent(arr[r]), float(totals[r]), len(cells), binds, charge)
        return Decision(False, None, None, len(cells), binds, charge)
    for evaluated, r in enumerate(order, 1):
        if mode == "per_agent":
            scheme = MaintenanceSubsidy.per_agent(arr[r])
        else:
            v = arr[r].reshape(3, n)
            scheme = MaintenanceSubsidy.conditional(v[0], v[1], v[2])
        if objective_holds(game, scheme, objective, inspected):
            return Decision(True, scheme, float(totals[r]), evaluated, binds, charge)
    return Decision(False, None, None, len(cells), binds, charge)


def min_actions_poa1(
    game: CostSharingGame,
    n_star: int,
    levels=(1.0,),
    amounts=None,
    tol: float | None = None,
) -> Decision:
    """Can subsidizing at most ``n_star`` actions make every equilibrium optimal?

    Each subsidized action receives ``level`` times its expected cost for some
    level in ``levels`` (the default is a full-cost subsidy), or, when
    ``amounts`` is given, one of those absolute values. Values are clipped to H.
    """
    tol = config.TOL if tol is None else tol
    prof = game.profiles()
    social = game.social_costs()
    best = float(social.min())
    ec = game.expected_costs()
    options = game.option_matrix()
    A = len(game.actions)
    evaluated = 0
    for size in range(0, min(n_star, A) + 1):
        for subset in itertools.combinations(range(A), size):
            menu = amounts if amounts is not None else levels
            for lv in itertools.product(menu, repeat=size):
                x = np.zeros(A)
                for a, f in zip(subset, lv):
                    x[a] = min(f if amounts is not None else f * ec[a], game.bound)
                mask = kernels.csg_nash_mask(prof, ec - x, options, tol)
                evaluated += 1
                if mask.any() and social[mask].max() <= best + tol * max(1.0, abs(best)):
                    return Decision(True, CsgSubsidy(x), float(x.sum()), evaluated)
    return Decision(False, None, None, evaluated)
