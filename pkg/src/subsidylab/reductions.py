"""Karp reductions from vertex cover and set cover to subsidy decision problems,
with brute-force oracles for checking them on small instances."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import CapExceeded, GameError
from .game import CostSharingGame, MaintenanceGame, SystemFunction
from .solvers import min_actions_poa1, min_agents_poa1, min_budget_decision

REDUCTION_BOUND = 2.0


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple

    def __post_init__(self):
        clean = set()
        for e in self.edges:
            u, v = (int(x) for x in e)
            if u == v:
                raise GameError("self-loops are not allowed")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GameError(f"edge {e} refers to a missing vertex")
            clean.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", tuple(sorted(clean)))

    def to_json(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.edges]}


@dataclass(frozen=True)
class SetCoverInstance:
    n: int
    sets: tuple
    k: int

    def __post_init__(self):
        sets = []
        for s in self.sets:
            fs = frozenset(int(x) for x in s)
            if not fs or any(not 0 <= x < self.n for x in fs):
                raise GameError("every subset must be nonempty and inside the universe")
            sets.append(fs)
        object.__setattr__(self, "sets", tuple(sets))
        if self.k < 0:
            raise GameError("k must be nonnegative")

    def to_json(self) -> dict:
        return {"n": self.n, "sets": [sorted(s) for s in self.sets], "k": self.k}


def _edge_cnf(g: Graph) -> SystemFunction:
    return SystemFunction.cnf(g.n, [[u + 1, v + 1] for u, v in g.edges])


def vc_to_cmg_poas(g: Graph, k: int):
    """Maintenance game where ``k`` subsidized agents can force an optimal
    equilibrium iff ``g`` has a vertex cover of size ``k``.

    Components are vertices, the system works when every edge has a working
    endpoint, all components are known to be broken and every repair costs 1.
    """
    game = MaintenanceGame(np.ones(g.n), np.zeros(g.n), _edge_cnf(g), REDUCTION_BOUND)
    return game, int(k)


def cover_witness_subsidy(g: Graph, cover) -> np.ndarray:
    """Per-agent subsidy that makes a given cover the only equilibrium."""
    s = np.zeros(g.n)
    s[list(cover)] = 1.0 + 1.0 / (2 * g.n)
    return s


def vc_to_cmg_system(g: Graph, k: int):
    """Maintenance game and budget such that the system can be guaranteed to work
    within the budget iff ``g`` has a vertex cover of size ``k``.

    Repairs cost ``1 - 1/(2n)``. The budget is ``k - 1``: once all but one cover
    vertex are paid for, the last one repairs on its own. For ``k = 0`` the
    budget is 0 when there is nothing to cover and negative otherwise.
    """
    n = max(g.n, 1)
    eps = 1.0 / (2 * n)
    game = MaintenanceGame(np.full(g.n, 1.0 - eps), np.zeros(g.n), _edge_cnf(g), REDUCTION_BOUND)
    if k >= 1:
        budget = float(k - 1)
    else:
        budget = 0.0 if not g.edges else -1.0
    return game, budget


def vc_to_cig_voi(g: Graph, k: int, experimental: bool = False):
    """Inspection game in which a budget of ``k`` keeps every agent's value of
    information nonnegative. Vertex agents repair at ``1 - 1/(2n)``; an extra
    agent with repair cost 1 owns the inspected component, which the system
    does not depend on. Validated only empirically."""
    if not experimental:
        raise GameError("this construction is experimental; pass experimental=True")
    n = g.n + 1
    eps = 1.0 / (2 * n)
    costs = np.concatenate([np.full(g.n, 1.0 - eps), [1.0]])
    phi = SystemFunction.cnf(n, [[u + 1, v + 1] for u, v in g.edges])
    game = MaintenanceGame(costs, np.zeros(n), phi, REDUCTION_BOUND)
    return game, float(k), g.n


def sc_to_csg_poas(inst: SetCoverInstance):
    """Cost-sharing game where subsidizing ``k`` actions by one unit each is meant
    to force an optimal equilibrium iff the instance has a cover with ``k`` sets.

    Agents are universe elements. Each set is an action usable by its members,
    each agent also has a private action, and one global action is open to
    everyone at cost ``n - 1/2``; all other actions cost 1.
    """
    n = inst.n
    actions, avail, costs = [], [], []
    for idx, s in enumerate(inst.sets):
        actions.append(f"S{idx}")
        avail.append(sorted(s))
        costs.append(1.0)
    for i in range(n):
        actions.append(f"T{i}")
        avail.append([i])
        costs.append(1.0)
    actions.append("V")
    avail.append(list(range(n)))
    costs.append(n - 0.5)
    game = CostSharingGame(n, tuple(actions), tuple(avail), ((1.0, costs),), max(float(n), 1.0))
    return game, int(inst.k)


def min_vertex_cover(g: Graph, cap: int = 16):
    if g.n > cap:
        raise CapExceeded(f"vertex cover oracle limited to {cap} vertices")
    for size in range(g.n + 1):
        for c in itertools.combinations(range(g.n), size):
            cs = set(c)
            if all(u in cs or v in cs for u, v in g.edges):
                return c
    return tuple(range(g.n))


def brute_vc(g: Graph, k: int, cap: int = 16) -> bool:
    return len(min_vertex_cover(g, cap)) <= k


def min_set_cover(inst: SetCoverInstance, cap: int = 12):
    if inst.n > cap:
        raise CapExceeded(f"set cover oracle limited to a universe of {cap}")
    universe = frozenset(range(inst.n))
    for size in range(len(inst.sets) + 1):
        for c in itertools.combinations(range(len(inst.sets)), size):
            if frozenset().union(*(inst.sets[i] for i in c)) == universe:
                return c
    return None


def brute_sc(inst: SetCoverInstance, cap: int = 12) -> bool:
    best = min_set_cover(inst, cap)
    return best is not None and len(best) <= inst.k


def verify_reduction(kind: str, instance, k: int | None = None) -> dict:
    """Decide an instance both directly and through its reduced game."""
    if kind == "cmg-poas":
        game, n_star = vc_to_cmg_poas(instance, k)
        oracle = brute_vc(instance, k)
        decision = min_agents_poa1(game, n_star)
        witness = list(min_vertex_cover(instance))
    elif kind == "cmg-system":
        game, budget = vc_to_cmg_system(instance, k)
        oracle = brute_vc(instance, k)
        decision = min_budget_decision(game, "system", budget)
        witness = list(min_vertex_cover(instance))
    elif kind == "csg-poas":
        game, n_star = sc_to_csg_poas(instance)
        oracle = brute_sc(instance)
        decision = min_actions_poa1(game, n_star, amounts=(1.0,))
        best = min_set_cover(instance)
        witness = None if best is None else list(best)
    elif kind == "cig-voi":
        game, budget, inspected = vc_to_cig_voi(instance, k, experimental=True)
        oracle = brute_vc(instance, k)
        decision = min_budget_decision(game, "voi", budget, inspected=inspected)
        witness = list(min_vertex_cover(instance))
    else:
        raise GameError(f"unknown reduction kind {kind!r}")
    return {
        "kind": kind,
        "k": k if k is not None else instance.k,
        "oracle": oracle,
        "game_decision": decision.answer,
        "agree": oracle == decision.answer,
        "oracle_witness": witness,
        "game_witness": decision.to_json(game)["witness"],
    }


def connected_graphs(max_vertices: int):
    """All connected graphs up to isomorphism with 1..max_vertices vertices."""
    import networkx as nx

    if max_vertices > 7:
        raise CapExceeded("the graph atlas covers at most 7 vertices")
    out = []
    for h in nx.graph_atlas_g():
        if 1 <= h.number_of_nodes() <= max_vertices and nx.is_connected(h):
            out.append(Graph(h.number_of_nodes(), tuple(h.edges())))
    return out


def random_set_cover(rng: np.random.Generator, max_n: int = 8, max_sets: int = 4) -> SetCoverInstance:
    n = int(rng.integers(2, max_n + 1))
    m = int(rng.integers(1, max_sets + 1))
    sets = []
    for _ in range(m):
        size = int(rng.integers(1, n + 1))
        sets.append(sorted(int(x) for x in rng.choice(n, size=size, replace=False)))
    k = int(rng.integers(0, max(n, 1)))
    return SetCoverInstance(n, sets, k)


def verify_many(kind: str, cases, workers: int | None = None) -> list:
    """``verify_reduction`` over ``(instance, k)`` pairs, in input order.

    Runs on a thread pool of ``SUBSIDYLAB_THREADS`` workers by default; the
    compiled kernels release the GIL.
    """
    from concurrent.futures import ThreadPoolExecutor

    from .config import worker_count

    workers = worker_count() if workers is None else max(1, int(workers))
    if workers == 1:
        return [verify_reduction(kind, inst, k) for inst, k in cases]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(lambda c: verify_reduction(kind, c[0], c[1]), cases))
