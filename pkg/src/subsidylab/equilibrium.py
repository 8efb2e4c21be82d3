"""Exact pure-Nash-equilibrium enumeration and social optima."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import config, kernels
from .game import (
    CostSharingGame,
    MaintenanceGame,
    agent_cost,
    csg_cost,
    csg_net_costs,
    effective_costs,
    state_label,
)


@dataclass(frozen=True)
class NashSet:
    """Equilibria of one game context, in ascending state order.

    Maintenance states are joint-action words; cost-sharing states are tuples of
    action indices.
    """

    states: tuple
    game: object
    scheme: object = None
    posterior: object = None

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __contains__(self, state):
        if isinstance(self.game, CostSharingGame):
            state = tuple(self.game.action_index(a) for a in state)
        return state in self.states

    @property
    def indices(self) -> np.ndarray:
        """Row indices of the states in the game's full state enumeration."""
        if isinstance(self.game, MaintenanceGame):
            return np.array(self.states, dtype=np.int64)
        return _profile_rows(self.game, self.states)

    def labels(self):
        if isinstance(self.game, MaintenanceGame):
            return [state_label(s, self.game.n) for s in self.states]
        return ["(" + ",".join(self.game.actions[a] for a in s) + ")" for s in self.states]

    def to_json(self):
        if isinstance(self.game, MaintenanceGame):
            return [int(s) for s in self.states]
        return [[self.game.actions[a] for a in s] for s in self.states]


def _profile_rows(game, states):
    """Positions of profiles in ``game.profiles()`` (mixed-radix decoding)."""
    rows = []
    for prof in states:
        r = 0
        for i, a in enumerate(prof):
            opts = game.options(i)
            r = r * len(opts) + opts.index(a)
        rows.append(r)
    return np.array(rows, dtype=np.int64)


def is_nash(game, state, scheme=None, posterior=None, tol: float | None = None) -> bool:
    """Single-state deviation check, independent of the vectorized kernels."""
    tol = config.TOL if tol is None else tol
    if isinstance(game, MaintenanceGame):
        own = agent_cost(game, state, scheme, posterior)
        for i in range(game.n):
            dev = agent_cost(game, state ^ (1 << i), scheme, posterior)
            if own[i] > dev[i] + tol:
                return False
        return True
    prof = [game.action_index(a) for a in state]
    own = csg_cost(game, prof, scheme, posterior)
    for i in range(game.agents):
        for a in game.options(i):
            if a == prof[i]:
                continue
            alt = list(prof)
            alt[i] = a
            if own[i] > csg_cost(game, alt, scheme, posterior)[i] + tol:
                return False
    return True


def nash_mask(game, scheme=None, posterior=None, tol: float | None = None, cap: int | None = None) -> np.ndarray:
    """Boolean mask over the full state enumeration of ``game``."""
    tol = config.TOL if tol is None else tol
    if isinstance(game, MaintenanceGame):
        phi = game.table(posterior, cap if cap is not None else config.CAP_N)
        return kernels.nash_mask(phi, effective_costs(game, scheme, posterior), tol)
    prof = game.profiles(cap if cap is not None else config.PROFILE_CAP)
    return kernels.csg_nash_mask(prof, csg_net_costs(game, scheme, posterior), game.option_matrix(), tol)


def enumerate_nash(game, scheme=None, posterior=None, tol: float | None = None, cap: int | None = None) -> NashSet:
    tol = config.TOL if tol is None else tol
    mask = nash_mask(game, scheme, posterior, tol, cap)
    if isinstance(game, MaintenanceGame):
        states = tuple(int(w) for w in np.flatnonzero(mask))
    else:
        prof = game.profiles()
        states = tuple(tuple(int(a) for a in prof[r]) for r in np.flatnonzero(mask))
    return NashSet(states, game, scheme, posterior)


def opt_cost(game, posterior=None):
    """Minimum unsubsidized social cost and its lowest-index minimizer."""
    costs = game.social_costs(posterior)
    r = int(np.argmin(costs))
    if isinstance(game, MaintenanceGame):
        return float(costs[r]), r
    return float(costs[r]), tuple(int(a) for a in game.profiles()[r])


def social_cost(game, state, posterior=None) -> float:
    """Unsubsidized social cost of one state."""
    if isinstance(game, MaintenanceGame):
        return float(game.social_costs(posterior)[state])
    used = {game.action_index(a) for a in state}
    ec = game.expected_costs(posterior)
    return float(sum(ec[a] for a in used))


def state_costs(game, nash: NashSet, scheme=None, posterior=None) -> np.ndarray:
    """Per-agent subsidized costs for each state in ``nash`` (rows follow states)."""
    if not len(nash):
        return np.zeros((0, game.n))
    if isinstance(game, MaintenanceGame):
        words = nash.indices
        fail = 1.0 - game.table(posterior)[words]
        c = effective_costs(game, scheme, posterior)
        bits = (words[:, None] >> np.arange(game.n)) & 1
        return bits * c + fail[:, None]
    return np.array([csg_cost(game, s, scheme, posterior) for s in nash.states])


def subsidy_paid(game, nash: NashSet, scheme=None, posterior=None) -> np.ndarray:
    """Total subsidy paid out in each state of ``nash``."""
    if scheme is None or not len(nash):
        return np.zeros(len(nash))
    if isinstance(game, MaintenanceGame):
        return np.array([scheme.paid(s, posterior) for s in nash.states])
    return np.array([scheme.paid(game, s) for s in nash.states])
