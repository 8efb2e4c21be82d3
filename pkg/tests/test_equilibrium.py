import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import brute_csg_nash, brute_nash
from strategies import csg_games, maintenance_games

from subsidylab.equilibrium import (
    enumerate_nash,
    is_nash,
    nash_mask,
    opt_cost,
    social_cost,
)
from subsidylab.game import (
    CostSharingGame,
    MaintenanceGame,
    MaintenanceSubsidy,
    SystemFunction,
)


@given(maintenance_games(max_n=5), st.data())
def test_enumeration_matches_brute_force(game, data):
    sigma = data.draw(st.lists(st.floats(0, 1), min_size=game.n, max_size=game.n))
    scheme = MaintenanceSubsidy.per_agent(sigma)
    assert list(enumerate_nash(game, scheme).states) == brute_nash(game, sigma)


@given(maintenance_games(max_n=6))
def test_mask_agrees_with_single_state_check(game):
    mask = nash_mask(game)
    assert [is_nash(game, s) for s in range(1 << game.n)] == mask.tolist()


@given(maintenance_games(max_n=6))
def test_maintenance_equilibria_exist(game):
    # identical-interest failure term makes this a potential game
    assert len(enumerate_nash(game)) >= 1


@given(maintenance_games(max_n=5, monotone=True))
def test_large_uniform_subsidy_leaves_all_repair(game):
    sigma = max(float(np.max(game.costs)), 0.0) + 0.01
    ne = enumerate_nash(game, MaintenanceSubsidy.uniform(game.n, sigma))
    assert ne.states == ((1 << game.n) - 1,)


@given(maintenance_games(max_n=4), st.floats(-3, 3))
def test_equilibria_invariant_under_cost_translation(game, shift):
    # shifting every agent's cost in every state by a constant cannot change any comparison
    base = [s for s in range(1 << game.n) if is_nash(game, s)]
    from subsidylab.game import agent_cost

    shifted = []
    for s in range(1 << game.n):
        own = agent_cost(game, s) + shift
        if all(own[i] <= agent_cost(game, s ^ (1 << i))[i] + shift + 1e-9 for i in range(game.n)):
            shifted.append(s)
    assert base == shifted


def test_symmetric_series_equilibria():
    game = MaintenanceGame([0.3, 0.3], [0.5, 0.5], SystemFunction.series(2))
    ne = enumerate_nash(game)
    assert ne.labels() == ["DN-DN", "RE-RE"]
    assert ne.to_json() == [0, 3]
    assert opt_cost(game) == (pytest.approx(0.6), 3)
    assert social_cost(game, 0) == pytest.approx(1.5)


@given(csg_games(), st.data())
def test_csg_enumeration_matches_brute_force(game, data):
    ec = game.expected_costs()
    budget = np.array([data.draw(st.floats(0, float(c))) if c > 0 else 0.0 for c in ec])
    from subsidylab.game import CsgSubsidy

    ne = enumerate_nash(game, CsgSubsidy(budget))
    want = brute_csg_nash(ec, game.avail, game.agents, budget)
    assert sorted(ne.states) == sorted(tuple(p) for p in want)
    assert all(is_nash(game, s, CsgSubsidy(budget)) for s in ne.states)


@given(csg_games())
def test_csg_equilibria_exist(game):
    # fair cost sharing is a potential game
    assert len(enumerate_nash(game)) >= 1


def test_csg_membership_accepts_ids():
    g = CostSharingGame(
        2, ("A", "B", "C", "D"), ({0, 1}, {1}, {1}, {0}),
        ((0.5, [5, 2, 6, 4]), (0.5, [5, 6, 2, 4])),
    )
    ne = enumerate_nash(g)
    assert ("A", "A") in ne
    assert ne.labels() == ["(A,A)", "(D,B)", "(D,C)"]
