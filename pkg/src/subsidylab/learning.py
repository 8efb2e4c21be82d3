"""Learning subsidies from data.

For a fixed game the planner's loss as a function of a uniform subsidy level is
piecewise constant, with jumps only at critical values. Offline learning
minimizes the sample average of such curves exactly; online learning runs an
exponential forecaster over them and samples from its density piece by piece.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import config, kernels
from .config import margin_for
from .equilibrium import enumerate_nash, state_costs
from .errors import CapExceeded, GameError, UndefinedMetric
from .game import (
    CostSharingGame,
    CsgSubsidy,
    MaintenanceGame,
    MaintenanceSubsidy,
    SystemFunction,
)
from .metrics import _worst_ne_cost
from .solvers import _dedupe, agent_thresholds, critical_values


def _as_scheme(game, scheme):
    if scheme is None or isinstance(scheme, (MaintenanceSubsidy, CsgSubsidy)):
        return scheme
    if isinstance(game, MaintenanceGame):
        if np.ndim(scheme) == 0:
            return MaintenanceSubsidy.uniform(game.n, float(scheme))
        return MaintenanceSubsidy.per_agent(scheme)
    return CsgSubsidy(scheme)


def loss_prior(game, scheme=None) -> float:
    """Worst equilibrium cost with the paid subsidy added back."""
    return _worst_ne_cost(game, _as_scheme(game, scheme))


def loss_prior_avg(game, scheme=None) -> float:
    """Average over the equilibrium set instead of the worst equilibrium."""
    scheme = _as_scheme(game, scheme)
    nash = enumerate_nash(game, scheme)
    if not len(nash):
        raise UndefinedMetric("the equilibrium set is empty")
    return float(np.mean(game.social_costs()[nash.indices]))


def loss_posterior(game: MaintenanceGame, scheme=None, inspected: int = 0) -> float:
    """Expected worst posterior-equilibrium cost after inspecting one component.

    Outcome 1 has weight ``p_j`` and outcome 0 weight ``1 - p_j``.
    """
    scheme = _as_scheme(game, scheme)
    pj = float(game.p[inspected])
    total = 0.0
    for y, w in ((1, pj), (0, 1.0 - pj)):
        if w > 0:
            total += w * _worst_ne_cost(game, scheme, (inspected, y))
    return total


def _worst_subsidized(game, scheme, posterior=None) -> float:
    nash = enumerate_nash(game, scheme, posterior)
    if not len(nash):
        raise UndefinedMetric("the equilibrium set is empty")
    return float(np.max(state_costs(game, nash, scheme, posterior).sum(axis=1)))


def loss_voi_csg(game: CostSharingGame, scheme=None, inspect=None, positive_part: bool = False) -> float:
    """Increase in the worst subsidized equilibrium cost caused by revealing costs.

    With ``inspect=None`` the whole world is revealed; otherwise only the cost
    of action ``inspect``. Branch values are averaged by branch probability.
    ``positive_part`` counts only increases.
    """
    scheme = _as_scheme(game, scheme)
    prior = _worst_subsidized(game, scheme)
    post = 0.0
    if inspect is None:
        for k, (prob, _) in enumerate(game.worlds):
            if prob > 0:
                post += prob * _worst_subsidized(_single_world(game, k), scheme)
    else:
        j = game.action_index(inspect)
        for value, prob in game.branches(j):
            post += prob * _worst_subsidized(game, scheme, (j, value))
    out = post - prior
    return max(out, 0.0) if positive_part else out


def _single_world(game: CostSharingGame, k: int) -> CostSharingGame:
    key = ("world", k)
    if key not in game._cache:
        game._cache[key] = CostSharingGame(game.agents, game.actions, game.avail, ((1.0, game.worlds[k][1]),), game.bound)
    return game._cache[key]


# ---------------------------------------------------------------------------
# loss curves


@dataclass(frozen=True)
class LossCurve:
    """Right-continuous step function on ``[0, bound]``.

    ``levels[k]`` is the value on ``[breakpoints[k-1], breakpoints[k])`` with
    the outer edges at 0 and ``bound``.
    """

    breakpoints: np.ndarray
    levels: np.ndarray
    bound: float

    def __post_init__(self):
        if len(self.levels) != len(self.breakpoints) + 1:
            raise GameError("a loss curve needs one more level than breakpoints")

    def __call__(self, sigma):
        idx = np.searchsorted(self.breakpoints, sigma, side="right")
        return self.levels[idx]

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate([[0.0], self.breakpoints, [self.bound]])

    def simplify(self, tol: float | None = None) -> "LossCurve":
        """Drop breakpoints across which the level does not change."""
        tol = config.TOL if tol is None else tol
        if not len(self.breakpoints):
            return self
        keep = np.abs(np.diff(self.levels)) > tol
        levels = np.concatenate([[self.levels[0]], self.levels[1:][keep]])
        return LossCurve(self.breakpoints[keep], levels, self.bound)

    def argmin(self, margin: float):
        """Least-subsidy point of the lowest piece and the level there."""
        k = int(np.argmin(self.levels))
        edges = self.edges
        width = edges[k + 1] - edges[k]
        if k == 0:
            sigma = 0.0
        elif margin < width / 2:
            sigma = float(edges[k] + margin)
        else:
            sigma = float((edges[k] + edges[k + 1]) / 2)
        return sigma, float(self.levels[k])


def sum_curves(curves, weights=None) -> LossCurve:
    """Weighted sum of step functions on a common interval."""
    if not curves:
        raise GameError("no curves to combine")
    bound = curves[0].bound
    if weights is None:
        weights = np.ones(len(curves))
    base = sum(w * c.levels[0] for w, c in zip(weights, curves))
    bps = np.concatenate([c.breakpoints for c in curves])
    jumps = np.concatenate([w * np.diff(c.levels) for w, c in zip(weights, curves)])
    if not len(bps):
        return LossCurve(np.zeros(0), np.array([base]), bound)
    uniq, inv = np.unique(bps, return_inverse=True)
    step = np.bincount(inv, weights=jumps, minlength=len(uniq))
    return LossCurve(uniq, base + np.concatenate([[0.0], np.cumsum(step)]), bound)


def loss_curve(game: MaintenanceGame, bound: float | None = None, kind: str = "prior", tol: float | None = None) -> LossCurve:
    """Exact step representation of the uniform-subsidy loss on ``[0, H]``."""
    tol = config.TOL if tol is None else tol
    H = game.bound if bound is None else bound
    cv = critical_values(game).merged
    bps = cv[cv < H - tol]
    edges = np.concatenate([[0.0], bps, [H]])
    mids = (edges[:-1] + edges[1:]) / 2
    masks = kernels.nash_mask_batch(game.table(), game.costs[None, :] - mids[:, None], tol)
    social = game.social_costs()[None, :]
    if kind == "prior":
        levels = np.where(masks, social, -np.inf).max(axis=1)
    elif kind == "avg":
        levels = np.where(masks, social, 0.0).sum(axis=1) / masks.sum(axis=1)
    else:
        raise GameError(f"unknown loss kind {kind!r}")
    if not np.all(np.isfinite(levels)):
        raise UndefinedMetric("the equilibrium set is empty on some piece")
    return LossCurve(bps, levels, H)


# ---------------------------------------------------------------------------
# game distributions


def _random_tree(leaves, rng, op=None):
    if len(leaves) == 1:
        return int(leaves[0])
    op = op or ("series" if rng.random() < 0.5 else "parallel")
    other = "parallel" if op == "series" else "series"
    k = int(rng.integers(2, min(len(leaves), 3) + 1))
    cuts = np.sort(rng.choice(np.arange(1, len(leaves)), size=k - 1, replace=False))
    parts = np.split(np.asarray(leaves), cuts)
    return (op, tuple(_random_tree(list(p), rng, other) for p in parts))


@dataclass(frozen=True)
class GameDistribution:
    """Generator of random maintenance games.

    ``family`` is ``series``, ``parallel``, ``sp`` (random series-parallel
    tree) or ``cnf`` (random monotone CNF). Costs follow ``cost_law`` on
    ``[0, bound]`` (``uniform``, ``triangular`` or ``point``); working
    probabilities are uniform on ``prior_range``.
    """

    family: str = "series"
    n: int = 5
    cost_law: str = "uniform"
    bound: float = 1.0
    prior_range: tuple = (0.05, 0.95)
    cost_value: float = 0.5

    def __post_init__(self):
        if self.family not in ("series", "parallel", "sp", "cnf"):
            raise GameError(f"unknown structure family {self.family!r}")
        if self.cost_law not in ("uniform", "triangular", "point"):
            raise GameError(f"unknown cost law {self.cost_law!r}")
        lo, hi = self.prior_range
        if not 0 <= lo <= hi <= 1:
            raise GameError("prior_range must lie within [0, 1]")

    @property
    def kappa(self) -> float:
        """Upper bound on the cost density (infinite for point masses)."""
        return {"uniform": 1.0 / self.bound, "triangular": 2.0 / self.bound, "point": math.inf}[self.cost_law]

    @classmethod
    def from_json(cls, doc: dict) -> "GameDistribution":
        known = {"family", "n", "cost_law", "H", "prior_range", "cost_value"}
        extra = set(doc) - known - {"seed"}
        if extra:
            raise GameError(f"unknown distribution fields {sorted(extra)}")
        return cls(
            family=doc.get("family", "series"),
            n=int(doc.get("n", 5)),
            cost_law=doc.get("cost_law", "uniform"),
            bound=float(doc.get("H", 1.0)),
            prior_range=tuple(doc.get("prior_range", (0.05, 0.95))),
            cost_value=float(doc.get("cost_value", 0.5)),
        )

    def _phi(self, rng) -> SystemFunction:
        n = self.n
        if self.family == "series":
            return SystemFunction.series(n)
        if self.family == "parallel":
            return SystemFunction.parallel(n)
        if self.family == "sp":
            return SystemFunction.sp(n, _random_tree(list(rng.permutation(n)), rng))
        clauses = []
        for _ in range(n):
            width = int(rng.integers(1, min(3, n) + 1))
            clauses.append([int(v) + 1 for v in rng.choice(n, size=width, replace=False)])
        return SystemFunction.cnf(n, clauses)

    def sample(self, rng: np.random.Generator) -> MaintenanceGame:
        H = self.bound
        if self.cost_law == "uniform":
            costs = rng.uniform(0.0, H, self.n)
        elif self.cost_law == "triangular":
            costs = rng.triangular(0.0, H / 2, H, self.n)
        else:
            costs = np.full(self.n, self.cost_value)
        p = rng.uniform(*self.prior_range, self.n)
        return MaintenanceGame(costs, p, self._phi(rng), H)

    def draw(self, rng: np.random.Generator, count: int) -> list:
        return [self.sample(rng) for _ in range(count)]


@dataclass(frozen=True)
class CsgDistribution:
    """Random perturbations of a template cost-sharing game: every world cost is
    multiplied by an independent factor uniform on ``[1 - jitter, 1 + jitter]``."""

    template: CostSharingGame
    jitter: float = 0.5

    def sample(self, rng: np.random.Generator) -> CostSharingGame:
        t = self.template
        worlds = tuple((p, c * rng.uniform(1 - self.jitter, 1 + self.jitter, len(c))) for p, c in t.worlds)
        return CostSharingGame(t.agents, t.actions, t.avail, worlds, t.bound * (1 + self.jitter))

    def draw(self, rng: np.random.Generator, count: int) -> list:
        return [self.sample(rng) for _ in range(count)]


# ---------------------------------------------------------------------------
# offline learning


@dataclass
class ErmResult:
    sigma: object
    loss: float
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        sigma = self.sigma.tolist() if isinstance(self.sigma, np.ndarray) else self.sigma
        return {"sigma": sigma, "loss": self.loss, **self.meta}


def erm_uniform(samples, bound: float | None = None, margin: float | None = None) -> ErmResult:
    """Exact minimizer of the average uniform-subsidy loss over ``samples``."""
    if not samples:
        raise GameError("ERM needs at least one sample")
    H = samples[0].bound if bound is None else bound
    margin = margin_for(H) if margin is None else margin
    curves = [loss_curve(g, H) for g in samples]
    avg = sum_curves(curves, np.full(len(curves), 1.0 / len(curves)))
    sigma, value = avg.argmin(margin)
    return ErmResult(sigma, value, {"pieces": len(avg.levels)})


def _thin(values, keep):
    if len(values) <= keep:
        return list(values)
    idx = np.unique(np.round(np.linspace(0, len(values) - 1, keep)).astype(int))
    return [values[i] for i in idx]


def _lattice(per_agent_reps, cell_cap):
    sizes = [len(r) for r in per_agent_reps]
    kind = "cells"
    if math.prod(sizes) > cell_cap:
        keep = max(2, int(cell_cap ** (1.0 / len(sizes))))
        per_agent_reps = [_thin(r, keep) for r in per_agent_reps]
        kind = "thinned"
    return np.array(list(itertools.product(*per_agent_reps)), dtype=np.float64).reshape(-1, len(per_agent_reps)), kind


def _worst_costs_batch(game, sigmas, posterior=None):
    masks = kernels.nash_mask_batch(game.table(posterior), game.costs[None, :] - sigmas, config.TOL)
    return np.where(masks, game.social_costs(posterior)[None, :], -np.inf).max(axis=1)


def erm_per_agent(
    samples,
    mode: str = "prior",
    inspected: int = 0,
    cell_cap: int = 20000,
    bound: float | None = None,
    margin: float | None = None,
) -> ErmResult:
    """Minimize the average loss over per-agent subsidy vectors.

    ``mode="prior"`` uses the worst-equilibrium loss. ``mode="conditional"``
    learns one vector per inspection outcome and scores it by the
    outcome-weighted posterior loss (weights ``p_j`` and ``1 - p_j``). The
    objective separates across the two outcomes, so each is searched alone.
    """
    if not samples:
        raise GameError("ERM needs at least one sample")
    n = samples[0].n
    if n > 8:
        raise CapExceeded("per-agent ERM is limited to n <= 8")
    H = samples[0].bound if bound is None else bound
    margin = margin_for(H) if margin is None else margin

    def search(post, weights):
        reps = []
        for i in range(n):
            t = _dedupe(np.concatenate([agent_thresholds(g, i, post) for g in samples]))
            reps.append([0.0] + [float(x + margin) for x in t if x + margin <= H])
        lattice, kind = _lattice(reps, cell_cap)
        total = np.zeros(len(lattice))
        for g, w in zip(samples, weights):
            if w > 0:
                total += w * _worst_costs_batch(g, lattice, post)
        order = np.lexsort((*(lattice[:, i] for i in reversed(range(n))), lattice.sum(axis=1), np.round(total, 12)))
        best = order[0]
        return lattice[best], float(total[best]), kind, len(lattice)

    m = len(samples)
    if mode == "prior":
        sigma, loss, kind, size = search(None, np.full(m, 1.0 / m))
        return ErmResult(sigma, loss, {"lattice": kind, "cells": size})
    if mode == "conditional":
        w1 = np.array([g.p[inspected] for g in samples]) / m
        s1, l1, k1, c1 = search((inspected, 1), w1)
        s0, l0, k0, c0 = search((inspected, 0), 1.0 / m - w1)
        return ErmResult(
            {"post1": s1, "post0": s0},
            l1 + l0,
            {
                "lattice": "thinned" if "thinned" in (k1, k0) else "cells",
                "cells": c1 + c0,
                "weighting": "outcome 1 weighted by p_j, outcome 0 by 1-p_j (assumed)",
                "inspected": inspected,
            },
        )
    raise GameError(f"unknown ERM mode {mode!r}")


def _csg_thresholds(game: CostSharingGame, a: int, subsidized, H):
    """Budgets of action ``a`` at which some agent switches between ``a`` and an
    unsubsidized alternative, for every pair of sharer counts."""
    ec = game.expected_costs()
    out = []
    N = game.agents
    for i in game.avail[a]:
        for b in game.options(i):
            if b == a or b in subsidized:
                continue
            for ka in range(1, N + 1):
                for kb in range(1, N + 1):
                    x = ec[a] - ka * ec[b] / kb
                    if config.TOL < x <= H:
                        out.append(x)
    return _dedupe(out)


def erm_csg(
    samples,
    subsidized,
    loss: str = "prior",
    grid: int = 21,
    cell_cap: int = 20000,
    inspect=None,
    margin: float | None = None,
) -> ErmResult:
    """Minimize the average loss over budgets for a few subsidized actions.

    Candidates per action are a uniform grid on ``[0, H]`` plus switching
    thresholds against unsubsidized alternatives. ``loss`` is ``prior`` (worst
    equilibrium cost with subsidy added back), ``voi`` (literal increase of the
    worst subsidized cost once costs are revealed) or ``voi_plus`` (only
    increases count).
    """
    if not samples:
        raise GameError("ERM needs at least one sample")
    base = samples[0]
    idx = [base.action_index(a) for a in subsidized]
    if len(idx) > 3:
        raise CapExceeded("CSG ERM supports at most 3 subsidized actions")
    H = min(g.bound for g in samples)
    margin = margin_for(H) if margin is None else margin
    A = len(base.actions)

    def evaluate(x):
        scheme = CsgSubsidy(x)
        vals = []
        for g in samples:
            if loss == "prior":
                vals.append(loss_prior(g, scheme))
            elif loss in ("voi", "voi_plus"):
                vals.append(loss_voi_csg(g, scheme, inspect, positive_part=loss == "voi_plus"))
            else:
                raise GameError(f"unknown CSG loss {loss!r}")
        return float(np.mean(vals))

    if not idx:
        return ErmResult(np.zeros(A), evaluate(np.zeros(A)), {"lattice": "empty"})
    reps = []
    for a in idx:
        t = _dedupe(np.concatenate([_csg_thresholds(g, a, set(idx), H) for g in samples]))
        cand = np.concatenate([np.linspace(0.0, H, grid), t + margin])
        reps.append(_dedupe(cand[cand <= H]).tolist())
    lattice, kind = _lattice(reps, cell_cap)
    best_x, best = None, math.inf
    for row in lattice:
        x = np.zeros(A)
        x[idx] = row
        v = evaluate(x)
        if v < best - config.TOL:
            best_x, best = x, v
    return ErmResult(best_x, best, {"lattice": kind, "cells": len(lattice), "loss_kind": loss})


# ---------------------------------------------------------------------------
# online learning


class CumulativeLoss:
    """Running sum of step functions supporting exact exponential-weight sampling."""

    def __init__(self, bound: float):
        self.bound = float(bound)
        self.base = 0.0
        self.bps = np.zeros(0)
        self.jumps = np.zeros(0)

    def add(self, curve: LossCurve):
        self.base += float(curve.levels[0])
        if len(curve.breakpoints):
            pos = np.searchsorted(self.bps, curve.breakpoints, side="right")
            self.bps = np.insert(self.bps, pos, curve.breakpoints)
            self.jumps = np.insert(self.jumps, pos, np.diff(curve.levels))

    def pieces(self):
        """Edges, widths and levels of the non-degenerate pieces."""
        edges = np.concatenate([[0.0], self.bps, [self.bound]])
        widths = np.diff(edges)
        levels = self.base + np.concatenate([[0.0], np.cumsum(self.jumps)])
        keep = widths > 0
        return edges[:-1][keep], widths[keep], levels[keep]

    def minimum(self) -> float:
        return float(self.pieces()[2].min())

    def masses(self, lam: float):
        left, widths, levels = self.pieces()
        logw = np.log(widths) - lam * (levels - levels.min())
        w = np.exp(logw - logw.max())
        return left, widths, w / w.sum()

    def sample(self, lam: float, rng: np.random.Generator, size: int | None = None):
        left, widths, probs = self.masses(lam)
        cdf = np.cumsum(probs)
        u = rng.random(size)
        k = np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), len(cdf) - 1)
        return left[k] + rng.random(size) * widths[k]


def default_lambda(T: int, n: int, bound: float, per_round: int | None = None) -> float:
    K = n * 2 ** (n - 1) if per_round is None else per_round
    return math.sqrt(8 * math.log(T * max(2, K)) / T) / ((2 * bound + 1) * n)


@dataclass
class OnlineResult:
    sigmas: np.ndarray
    losses: np.ndarray
    cum_regret: np.ndarray
    lam: float
    final: CumulativeLoss
    curves: list

    @property
    def regret(self) -> float:
        return float(self.cum_regret[-1]) if len(self.cum_regret) else 0.0


def online_forecaster(stream, rng: np.random.Generator, lam: float | None = None, bound: float | None = None) -> OnlineResult:
    """Full-information exponential forecaster over uniform subsidies.

    Round ``t`` samples a subsidy from the density proportional to
    ``exp(-lam * cumulative loss of rounds before t)``, then the game is revealed
    and its loss curve joins the cumulative sum. ``stream`` holds games or
    precomputed loss curves.
    """
    curves = [c if isinstance(c, LossCurve) else loss_curve(c, bound).simplify() for c in stream]
    T = len(curves)
    if T == 0:
        raise GameError("empty stream")
    H = curves[0].bound
    if lam is None:
        n = stream[0].n if isinstance(stream[0], MaintenanceGame) else 1
        lam = default_lambda(T, n, H)
    cum = CumulativeLoss(H)
    sigmas = np.empty(T)
    losses = np.empty(T)
    regret = np.empty(T)
    total = 0.0
    for t, curve in enumerate(curves):
        sigma = float(cum.sample(lam, rng))
        loss = float(curve(sigma))
        cum.add(curve)
        total += loss
        sigmas[t], losses[t] = sigma, loss
        regret[t] = total - cum.minimum()
    return OnlineResult(sigmas, losses, regret, lam, cum, curves)


def dispersion_diagnostic(curves, eps: float, bound: float | None = None) -> int:
    """Largest number of curves with a breakpoint inside one closed window of width ``eps``."""
    H = curves[0].bound if curves and bound is None else bound
    pts, ids = [], []
    for k, c in enumerate(curves):
        b = np.unique(c.breakpoints)
        b = b[(b >= 0) & (b <= H)]
        pts.append(b)
        ids.append(np.full(len(b), k))
    if not pts or not sum(len(p) for p in pts):
        return 0
    x = np.concatenate(pts)
    who = np.concatenate(ids)
    order = np.argsort(x, kind="stable")
    x, who = x[order], who[order]
    counts = {}
    best = 0
    hi = 0
    for lo in range(len(x)):
        while hi < len(x) and x[hi] <= x[lo] + eps:
            counts[who[hi]] = counts.get(who[hi], 0) + 1
            hi += 1
        best = max(best, len(counts))
        c = counts[who[lo]] - 1
        if c:
            counts[who[lo]] = c
        else:
            del counts[who[lo]]
    return best
