"""Game representations and exact expected-cost evaluation.

Two families are modelled:

* component-maintenance games: agent ``i`` owns component ``i`` and either
  repairs it (bit ``i`` of the joint-action word is 1) or does nothing. A
  repaired component works for sure; an unrepaired one works with prior
  probability ``p[i]``. Every agent pays its repair cost when repairing plus the
  probability that the system fails.
* cost-sharing games: agents pick among shared actions whose cost, uncertain
  over a finite set of worlds, is split evenly among the users.

Joint actions of a maintenance game are integers; bit ``i`` is agent ``i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import config, kernels
from .errors import CapExceeded, GameError, InconsistentRevelation

DN, RE = 0, 1


def popcount(word: int) -> int:
    return bin(word).count("1")


def word_bits(word: int, n: int) -> np.ndarray:
    return np.array([(word >> i) & 1 for i in range(n)], dtype=np.int64)


def bits_to_word(bits) -> int:
    return sum(1 << i for i, b in enumerate(bits) if b)


def state_label(word: int, n: int) -> str:
    return "-".join("RE" if (word >> i) & 1 else "DN" for i in range(n))


# ---------------------------------------------------------------------------
# structure functions


@dataclass(frozen=True)
class SystemFunction:
    """Boolean map from component states to the system state.

    ``kind`` is ``"cnf"`` (tuple of clauses of signed 1-based literals),
    ``"sp"`` (nested ``("series"|"parallel", children)`` tuples with integer
    component leaves) or ``"table"`` (tuple of 2^n zeros and ones).
    """

    arity: int
    kind: str
    body: tuple

    def __post_init__(self):
        n = self.arity
        if not isinstance(n, int) or n < 0:
            raise GameError(f"arity must be a nonnegative integer, got {n!r}")
        if self.kind == "cnf":
            for clause in self.body:
                for lit in clause:
                    if not isinstance(lit, int) or lit == 0 or abs(lit) > n:
                        raise GameError(f"bad literal {lit!r} for arity {n}")
        elif self.kind == "sp":
            seen = []
            _collect_leaves(self.body, seen)
            if len(set(seen)) != len(seen):
                raise GameError("series-parallel leaves must be distinct components")
            if any(not 0 <= v < n for v in seen):
                raise GameError("series-parallel leaf out of range")
        elif self.kind == "table":
            if len(self.body) != 1 << n or any(v not in (0, 1) for v in self.body):
                raise GameError(f"truth table must hold 2^{n} binary entries")
        else:
            raise GameError(f"unknown structure kind {self.kind!r}")

    @classmethod
    def cnf(cls, n: int, clauses) -> "SystemFunction":
        return cls(n, "cnf", tuple(tuple(int(l) for l in c) for c in clauses))

    @classmethod
    def sp(cls, n: int, tree) -> "SystemFunction":
        return cls(n, "sp", _freeze_tree(tree))

    @classmethod
    def table(cls, n: int, values) -> "SystemFunction":
        return cls(n, "table", tuple(int(v) for v in values))

    @classmethod
    def series(cls, n: int) -> "SystemFunction":
        return cls.sp(n, ("series", tuple(range(n))))

    @classmethod
    def parallel(cls, n: int) -> "SystemFunction":
        return cls.sp(n, ("parallel", tuple(range(n))))

    @classmethod
    def constant_true(cls, n: int) -> "SystemFunction":
        return cls.cnf(n, ())

    def evaluate(self, x: int) -> int:
        if self.kind == "table":
            return self.body[x]
        if self.kind == "cnf":
            for clause in self.body:
                if not any(((x >> (abs(l) - 1)) & 1) == (l > 0) for l in clause):
                    return 0
            return 1
        return int(_sp_eval(self.body, x))

    def truth_table(self, cap: int | None = None) -> np.ndarray:
        cap = config.CAP_N if cap is None else cap
        n = self.arity
        if n > cap:
            raise CapExceeded(f"truth table over {n} components exceeds cap {cap}")
        if self.kind == "table":
            return np.array(self.body, dtype=np.float64)
        words = np.arange(1 << n)
        if self.kind == "cnf":
            out = np.ones(1 << n, dtype=bool)
            for clause in self.body:
                sat = np.zeros(1 << n, dtype=bool)
                for l in clause:
                    bit = ((words >> (abs(l) - 1)) & 1).astype(bool)
                    sat |= bit if l > 0 else ~bit
                out &= sat
            return out.astype(np.float64)
        bits = [((words >> i) & 1).astype(np.float64) for i in range(n)]
        return np.asarray(_sp_reliability(self.body, bits), dtype=np.float64) * np.ones(1 << n)

    def to_table(self, cap: int | None = None) -> "SystemFunction":
        cap = config.CAP_N if cap is None else cap
        table = self.truth_table(cap)
        converted = SystemFunction.table(self.arity, table.astype(int))
        if self.arity <= 12:
            for x in range(1 << self.arity):
                if converted.evaluate(x) != self.evaluate(x):
                    raise GameError("representation conversion disagrees pointwise")
        return converted

    def is_monotone(self, cap: int | None = None) -> bool:
        cap = config.CAP_N if cap is None else cap
        t = self.truth_table(cap)
        words = np.arange(1 << self.arity)
        for i in range(self.arity):
            up = words | (1 << i)
            if np.any(t > t[up]):
                return False
        return True

    def to_json(self) -> dict:
        if self.kind == "cnf":
            return {"kind": "cnf", "clauses": [list(c) for c in self.body]}
        if self.kind == "sp":
            return {"kind": "sp", "tree": _tree_to_json(self.body)}
        return {"kind": "table", "values": list(self.body)}


def _freeze_tree(node):
    if isinstance(node, (int, np.integer)) and not isinstance(node, bool):
        return int(node)
    if isinstance(node, dict):
        if len(node) != 1:
            raise GameError("series-parallel node must have exactly one key")
        ((op, children),) = node.items()
    else:
        op, children = node
    if op not in ("series", "parallel"):
        raise GameError(f"unknown series-parallel operator {op!r}")
    return (op, tuple(_freeze_tree(c) for c in children))


def _tree_to_json(node):
    if isinstance(node, int):
        return node
    op, children = node
    return {op: [_tree_to_json(c) for c in children]}


def _collect_leaves(node, out):
    if isinstance(node, int):
        out.append(node)
        return
    for c in node[1]:
        _collect_leaves(c, out)


def _sp_eval(node, x: int) -> bool:
    if isinstance(node, int):
        return bool((x >> node) & 1)
    op, children = node
    vals = (_sp_eval(c, x) for c in children)
    return all(vals) if op == "series" else any(vals)


def _sp_reliability(node, leaf):
    """Closed-form reliability; ``leaf[i]`` is component i's working probability."""
    if isinstance(node, int):
        return leaf[node]
    op, children = node
    vals = [_sp_reliability(c, leaf) for c in children]
    if op == "series":
        out = 1.0
        for v in vals:
            out = out * v
        return out
    fail = 1.0
    for v in vals:
        fail = fail * (1.0 - v)
    return 1.0 - fail


# ---------------------------------------------------------------------------
# maintenance games


def _vector(values, n, name):
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if arr.shape != (n,):
        raise GameError(f"{name} must have length {n}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise GameError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MaintenanceGame:
    costs: np.ndarray
    p: np.ndarray
    phi: SystemFunction
    bound: float = 1.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = self.phi.arity
        object.__setattr__(self, "costs", _vector(self.costs, n, "costs"))
        object.__setattr__(self, "p", _vector(self.p, n, "p"))
        if np.any(self.p < 0) or np.any(self.p > 1):
            raise GameError("component probabilities must lie in [0, 1]")
        if not self.bound > 0:
            raise GameError("bound must be positive")
        if np.any(np.abs(self.costs) > self.bound + config.TOL):
            raise GameError(f"repair costs must satisfy |C_i| <= {self.bound}")

    @property
    def n(self) -> int:
        return self.phi.arity

    def prior_for(self, posterior=None) -> np.ndarray:
        if posterior is None:
            return self.p
        j, y = posterior
        if not 0 <= j < self.n or y not in (0, 1):
            raise GameError(f"bad posterior {posterior!r}")
        p = self.p.copy()
        p[j] = float(y)
        return p

    def with_prior(self, p) -> "MaintenanceGame":
        return MaintenanceGame(self.costs, p, self.phi, self.bound)

    def table(self, posterior=None, cap: int | None = None) -> np.ndarray:
        """Reliability of the system for every joint action (read-only)."""
        cap = config.CAP_N if cap is None else cap
        posterior = _norm_posterior(posterior)
        key = ("phi", posterior)
        if key not in self._cache:
            arr = reliability_table(self, posterior, cap)
            arr.setflags(write=False)
            self._cache[key] = arr
        return self._cache[key]

    def support_table(self, cap: int | None = None) -> np.ndarray:
        """Worst-case system state over the prior's support, per joint action."""
        cap = config.CAP_N if cap is None else cap
        if "support" not in self._cache:
            arr = kernels.forcing_transform(self.phi.truth_table(cap), self.p, 1)
            arr.setflags(write=False)
            self._cache["support"] = arr
        return self._cache["support"]

    def reliability(self, s: int, posterior=None) -> float:
        p = self.prior_for(posterior)
        if self.phi.kind == "sp":
            leaf = [1.0 if (s >> i) & 1 else p[i] for i in range(self.n)]
            return float(_sp_reliability(self.phi.body, leaf))
        return float(self.table(posterior)[s])

    def social_costs(self, posterior=None) -> np.ndarray:
        """Unsubsidized social cost of every joint action."""
        posterior = _norm_posterior(posterior)
        key = ("social", posterior)
        if key not in self._cache:
            n = self.n
            words = np.arange(1 << n)
            repair = np.zeros(1 << n)
            for i in range(n):
                repair += self.costs[i] * ((words >> i) & 1)
            arr = repair + n * (1.0 - self.table(posterior))
            arr.setflags(write=False)
            self._cache[key] = arr
        return self._cache[key]

    def to_json(self) -> dict:
        return {
            "type": "maintenance",
            "n": self.n,
            "costs": [float(c) for c in self.costs],
            "p": [float(v) for v in self.p],
            "phi": self.phi.to_json(),
            "H": float(self.bound),
        }


def _norm_posterior(posterior):
    return None if posterior is None else (int(posterior[0]), int(posterior[1]))


def reliability_table(game: MaintenanceGame, posterior=None, cap: int | None = None) -> np.ndarray:
    """Probability that the system works, for all 2^n joint actions at once."""
    cap = config.CAP_N if cap is None else cap
    p = game.prior_for(posterior)
    n = game.n
    if game.phi.kind == "sp":
        words = np.arange(1 << n)
        leaf = [np.where((words >> i) & 1, 1.0, p[i]) for i in range(n)]
        return np.asarray(_sp_reliability(game.phi.body, leaf), dtype=np.float64) * np.ones(1 << n)
    if n > cap:
        raise CapExceeded(f"n={n} exceeds the enumeration cap {cap}; use a series-parallel body")
    return kernels.forcing_transform(game.phi.truth_table(cap), p, 0)


@dataclass(frozen=True)
class MaintenanceSubsidy:
    """Repair subsidies for the prior game and for each inspection outcome.

    For unconditional schemes the three vectors coincide; ``post1``/``post0``
    apply in the posterior game after the inspected component is observed
    working or broken.
    """

    prior: np.ndarray
    post1: np.ndarray
    post0: np.ndarray
    mode: str = "per_agent"

    def __post_init__(self):
        for name in ("prior", "post1", "post0"):
            arr = np.array(getattr(self, name), dtype=np.float64).reshape(-1)
            if np.any(arr < -config.TOL) or not np.all(np.isfinite(arr)):
                raise GameError("subsidies must be finite and nonnegative")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (len(self.prior) == len(self.post1) == len(self.post0)):
            raise GameError("subsidy vectors must share a length")

    @classmethod
    def none(cls, n: int) -> "MaintenanceSubsidy":
        z = np.zeros(n)
        return cls(z, z, z, "none")

    @classmethod
    def uniform(cls, n: int, sigma: float) -> "MaintenanceSubsidy":
        v = np.full(n, float(sigma))
        return cls(v, v, v, "uniform")

    @classmethod
    def per_agent(cls, values) -> "MaintenanceSubsidy":
        v = np.array(values, dtype=np.float64)
        return cls(v, v, v, "per_agent")

    @classmethod
    def conditional(cls, prior, post1, post0) -> "MaintenanceSubsidy":
        return cls(prior, post1, post0, "conditional")

    @property
    def n(self) -> int:
        return len(self.prior)

    def vector(self, posterior=None) -> np.ndarray:
        if posterior is None:
            return self.prior
        return self.post1 if posterior[1] == 1 else self.post0

    def paid(self, s: int, posterior=None) -> float:
        v = self.vector(posterior)
        return float(sum(v[i] for i in range(self.n) if (s >> i) & 1))

    def check(self, game: MaintenanceGame):
        if self.n != game.n:
            raise GameError("subsidy length does not match the game")
        for v in (self.prior, self.post1, self.post0):
            if np.any(v > game.bound + config.TOL):
                raise GameError(f"subsidies must not exceed H={game.bound}")

    def to_json(self) -> dict:
        if self.mode == "uniform":
            return {"mode": "uniform", "sigma": float(self.prior[0]) if self.n else 0.0}
        if self.mode in ("per_agent", "none"):
            return {"mode": "per_agent", "sigma": [float(v) for v in self.prior]}
        return {
            "mode": "conditional",
            "prior": [float(v) for v in self.prior],
            "post1": [float(v) for v in self.post1],
            "post0": [float(v) for v in self.post0],
        }


def effective_costs(game: MaintenanceGame, scheme=None, posterior=None) -> np.ndarray:
    if scheme is None:
        return np.array(game.costs)
    return game.costs - scheme.vector(posterior)


def agent_cost(game: MaintenanceGame, s: int, scheme=None, posterior=None) -> np.ndarray:
    """Expected cost of every agent at joint action ``s``, net of subsidies."""
    if not 0 <= s < 1 << game.n:
        raise GameError(f"joint action {s} out of range")
    c = effective_costs(game, scheme, posterior)
    fail = 1.0 - game.reliability(s, posterior)
    return np.array([c[i] * ((s >> i) & 1) + fail for i in range(game.n)])


# ---------------------------------------------------------------------------
# cost-sharing games


@dataclass(frozen=True, eq=False)
class CostSharingGame:
    """Bayesian cost-sharing game.

    ``avail[a]`` is the set of agents allowed to use action ``a``; each world is
    a ``(probability, cost vector over actions)`` pair.
    """

    agents: int
    actions: tuple
    avail: tuple
    worlds: tuple
    bound: float | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        A = len(self.actions)
        if len(set(self.actions)) != A:
            raise GameError("action ids must be distinct")
        if self.agents < 1:
            raise GameError("a cost-sharing game needs at least one agent")
        avail = tuple(frozenset(int(i) for i in s) for s in self.avail)
        if len(avail) != A:
            raise GameError("one availability set per action is required")
        for s in avail:
            if any(not 0 <= i < self.agents for i in s):
                raise GameError("availability refers to an unknown agent")
        object.__setattr__(self, "avail", avail)
        worlds = []
        for prob, costs in self.worlds:
            arr = np.array(costs, dtype=np.float64).reshape(-1)
            if arr.shape != (A,):
                raise GameError("every world must price every action")
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise GameError("world costs must be finite and nonnegative")
            arr.setflags(write=False)
            worlds.append((float(prob), arr))
        if not worlds:
            raise GameError("at least one world is required")
        probs = np.array([w[0] for w in worlds])
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise GameError("world probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "worlds", tuple(worlds))
        cmax = max(float(w[1].max()) if A else 0.0 for w in worlds)
        if self.bound is None:
            object.__setattr__(self, "bound", max(cmax, 1.0))
        elif cmax > self.bound + config.TOL:
            raise GameError("world costs exceed the bound H")
        for i in range(self.agents):
            if not self.options(i):
                raise GameError(f"agent {i} has no available action")

    @property
    def n(self) -> int:
        return self.agents

    def options(self, i: int) -> tuple:
        return tuple(a for a in range(len(self.actions)) if i in self.avail[a])

    def action_index(self, action) -> int:
        if isinstance(action, (int, np.integer)) and not isinstance(action, bool):
            if not 0 <= action < len(self.actions):
                raise GameError(f"unknown action index {action}")
            return int(action)
        try:
            return self.actions.index(action)
        except ValueError:
            raise GameError(f"unknown action {action!r}") from None

    def branch_worlds(self, posterior=None):
        """Worlds consistent with a revealed ``(action, cost)`` pair, renormalized."""
        if posterior is None:
            return list(self.worlds)
        j = self.action_index(posterior[0])
        value = float(posterior[1])
        kept = [(p, c) for p, c in self.worlds if abs(c[j] - value) <= config.TOL and p > 0]
        mass = sum(p for p, _ in kept)
        if not kept or mass <= 0:
            raise InconsistentRevelation()
        return [(p / mass, c) for p, c in kept]

    def expected_costs(self, posterior=None) -> np.ndarray:
        key = ("ecost", _posterior_key(self, posterior))
        if key not in self._cache:
            total = np.zeros(len(self.actions))
            for p, c in self.branch_worlds(posterior):
                total += p * c
            total.setflags(write=False)
            self._cache[key] = total
        return self._cache[key]

    def branches(self, action):
        """Distinct revealed cost values of an action with their probabilities."""
        j = self.action_index(action)
        out = []
        for p, c in self.worlds:
            if p <= 0:
                continue
            for k, (v, q) in enumerate(out):
                if abs(v - c[j]) <= config.TOL:
                    out[k] = (v, q + p)
                    break
            else:
                out.append((float(c[j]), p))
        return sorted(out)

    def profile_count(self) -> int:
        return math.prod(len(self.options(i)) for i in range(self.agents))

    def profiles(self, cap: int | None = None) -> np.ndarray:
        """All profiles as rows of action indices, agent 0 varying slowest."""
        cap = config.PROFILE_CAP if cap is None else cap
        if "profiles" not in self._cache:
            total = self.profile_count()
            if total > cap:
                raise CapExceeded(f"{total} profiles exceed the cap {cap}")
            idx = np.arange(total)
            out = np.empty((total, self.agents), dtype=np.int32)
            for i in reversed(range(self.agents)):
                opts = np.array(self.options(i), dtype=np.int32)
                out[:, i] = opts[idx % len(opts)]
                idx //= len(opts)
            out.setflags(write=False)
            self._cache["profiles"] = out
        return self._cache["profiles"]

    def option_matrix(self) -> np.ndarray:
        if "options" not in self._cache:
            width = max(len(self.options(i)) for i in range(self.agents))
            m = np.full((self.agents, width), -1, dtype=np.int32)
            for i in range(self.agents):
                opts = self.options(i)
                m[i, : len(opts)] = opts
            self._cache["options"] = m
        return self._cache["options"]

    def usage(self) -> np.ndarray:
        """Boolean (profiles x actions) matrix: is the action used by anyone."""
        if "usage" not in self._cache:
            prof = self.profiles()
            used = np.zeros((len(prof), len(self.actions)), dtype=bool)
            rows = np.arange(len(prof))
            for i in range(self.agents):
                used[rows, prof[:, i]] = True
            self._cache["usage"] = used
        return self._cache["usage"]

    def social_costs(self, posterior=None) -> np.ndarray:
        return self.usage() @ self.expected_costs(posterior)

    def to_json(self) -> dict:
        return {
            "type": "cost_sharing",
            "agents": self.agents,
            "actions": [{"id": a, "avail": sorted(s)} for a, s in zip(self.actions, self.avail)],
            "worlds": [
                {"prob": p, "costs": {a: float(v) for a, v in zip(self.actions, c)}}
                for p, c in self.worlds
            ],
            "H": float(self.bound),
        }


def _posterior_key(game, posterior):
    if posterior is None:
        return None
    return (game.action_index(posterior[0]), round(float(posterior[1]), 12))


@dataclass(frozen=True)
class CsgSubsidy:
    """Per-action subsidy budgets, shared evenly by an action's users."""

    budget: np.ndarray

    def __post_init__(self):
        arr = np.array(self.budget, dtype=np.float64).reshape(-1)
        if np.any(arr < -config.TOL) or not np.all(np.isfinite(arr)):
            raise GameError("action budgets must be finite and nonnegative")
        arr.setflags(write=False)
        object.__setattr__(self, "budget", arr)

    @classmethod
    def none(cls, game: CostSharingGame) -> "CsgSubsidy":
        return cls(np.zeros(len(game.actions)))

    @classmethod
    def from_dict(cls, game: CostSharingGame, budgets: dict) -> "CsgSubsidy":
        v = np.zeros(len(game.actions))
        for a, x in budgets.items():
            v[game.action_index(a)] = float(x)
        return cls(v)

    def check(self, game: CostSharingGame):
        if len(self.budget) != len(game.actions):
            raise GameError("budget length does not match the action set")
        if np.any(self.budget > game.bound + config.TOL):
            raise GameError(f"budgets must not exceed H={game.bound}")

    def paid(self, game: CostSharingGame, prof) -> float:
        return float(sum(self.budget[a] for a in {game.action_index(a) for a in prof}))

    def to_json(self, game: CostSharingGame) -> dict:
        return {"budget": {a: float(v) for a, v in zip(game.actions, self.budget) if v != 0}}


def csg_net_costs(game: CostSharingGame, scheme=None, posterior=None) -> np.ndarray:
    ec = game.expected_costs(posterior)
    return ec if scheme is None else ec - scheme.budget


def csg_cost(game: CostSharingGame, prof, scheme=None, posterior=None) -> np.ndarray:
    """What each agent pays at a profile: its action's net cost over the sharer count."""
    prof = [game.action_index(a) for a in prof]
    if len(prof) != game.agents:
        raise GameError("profile must assign one action per agent")
    for i, a in enumerate(prof):
        if i not in game.avail[a]:
            raise GameError(f"action {game.actions[a]!r} is not available to agent {i}")
    net = csg_net_costs(game, scheme, posterior)
    return np.array([net[a] / prof.count(a) for a in prof])
