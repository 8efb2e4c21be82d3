import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import brute_costs, brute_reliability
from strategies import maintenance_games, sp_trees, system_functions

from subsidylab.errors import GameError, InconsistentRevelation
from subsidylab.game import (
    CostSharingGame,
    CsgSubsidy,
    MaintenanceGame,
    MaintenanceSubsidy,
    SystemFunction,
    agent_cost,
    bits_to_word,
    csg_cost,
    reliability_table,
    state_label,
    word_bits,
)
from subsidylab.io import canonical_json, parse_game


def test_state_label_orders_agents_left_to_right():
    assert state_label(0b01, 2) == "RE-DN"
    assert state_label(0b10, 2) == "DN-RE"
    assert bits_to_word(word_bits(0b1011, 4)) == 0b1011


def test_cnf_literals_are_one_based():
    phi = SystemFunction.cnf(3, [[1, 2], [3]])
    assert phi.evaluate(0b100) == 0
    assert phi.evaluate(0b101) == 1
    with pytest.raises(GameError):
        SystemFunction.cnf(2, [[0]])
    with pytest.raises(GameError):
        SystemFunction.cnf(2, [[3]])


def test_sp_tree_leaves():
    with pytest.raises(GameError):
        SystemFunction.sp(2, ("series", (0, 0)))
    with pytest.raises(GameError):
        SystemFunction.sp(2, ("series", (0, 2)))
    # a component outside the tree is irrelevant to the system
    game = MaintenanceGame([0.1, 0.1, 0.1], [0.5, 0.5, 0.5], SystemFunction.sp(3, ("series", (0, 1))))
    assert game.reliability(0b100) == pytest.approx(0.25)


def test_table_arity_checked():
    with pytest.raises(GameError):
        SystemFunction.table(2, [0, 1, 1])


@given(st.integers(1, 5).flatmap(lambda n: system_functions(n)))
def test_truth_table_matches_evaluate(phi):
    table = phi.truth_table()
    assert [phi.evaluate(x) for x in range(1 << phi.arity)] == table.astype(int).tolist()


@given(maintenance_games(max_n=5))
def test_reliability_table_matches_enumeration(game):
    table = game.table()
    for s in range(1 << game.n):
        assert table[s] == pytest.approx(brute_reliability(game.phi.evaluate, game.p, s), abs=1e-12)


@given(st.integers(1, 9).flatmap(lambda n: st.tuples(sp_trees(list(range(n))), st.lists(st.floats(0, 1), min_size=n, max_size=n))))
def test_sp_closed_form_matches_truth_table_transform(args):
    tree, p = args
    n = len(p)
    phi = SystemFunction.sp(n, tree)
    game = MaintenanceGame(np.zeros(n), p, phi)
    table = reliability_table(game.with_prior(p), None)
    flat = MaintenanceGame(np.zeros(n), p, phi.to_table())
    ref = flat.table()
    assert np.max(np.abs(table - ref)) <= 1e-12
    for s in range(0, 1 << n, max(1, (1 << n) // 16)):
        assert game.reliability(s) == pytest.approx(ref[s], abs=1e-12)


@given(maintenance_games(max_n=4), st.data())
def test_posterior_equals_overwritten_prior(game, data):
    j = data.draw(st.integers(0, game.n - 1))
    y = data.draw(st.integers(0, 1))
    p = game.p.copy()
    p[j] = y
    np.testing.assert_allclose(game.table((j, y)), game.with_prior(p).table(), atol=1e-12)


@given(maintenance_games(max_n=5, monotone=True))
def test_monotone_reliability_is_nondecreasing(game):
    table = game.table()
    for s in range(1 << game.n):
        for i in range(game.n):
            if not (s >> i) & 1:
                assert table[s | (1 << i)] >= table[s] - 1e-12


@given(maintenance_games(max_n=4), st.data())
def test_agent_cost_matches_direct_formula(game, data):
    sigma = data.draw(st.lists(st.floats(0, 1), min_size=game.n, max_size=game.n))
    scheme = MaintenanceSubsidy.per_agent(sigma)
    for s in range(1 << game.n):
        np.testing.assert_allclose(agent_cost(game, s, scheme), brute_costs(game, s, sigma), atol=1e-12)


@given(maintenance_games(max_n=4), st.data())
def test_accounting_identity(game, data):
    sigma = data.draw(st.lists(st.floats(0, 1), min_size=game.n, max_size=game.n))
    scheme = MaintenanceSubsidy.per_agent(sigma)
    social = game.social_costs()
    for s in range(1 << game.n):
        total = agent_cost(game, s, scheme).sum() + scheme.paid(s)
        assert total == pytest.approx(social[s], abs=1e-12)


def test_support_table_is_worst_case_state():
    # parallel pair, component 0 always works: system always up without repairs
    game = MaintenanceGame([0.1, 0.1], [1.0, 0.3], SystemFunction.parallel(2))
    assert game.support_table()[0] == 1.0
    game = MaintenanceGame([0.1, 0.1], [0.999, 0.3], SystemFunction.series(2))
    assert game.support_table().tolist() == [0.0, 0.0, 0.0, 1.0]


def test_cost_bound_enforced():
    with pytest.raises(GameError):
        MaintenanceGame([1.5], [0.5], SystemFunction.series(1))
    MaintenanceGame([1.5], [0.5], SystemFunction.series(1), bound=2.0)
    with pytest.raises(GameError):
        MaintenanceGame([0.5], [1.5], SystemFunction.series(1))


def test_scheme_validation():
    game = MaintenanceGame([0.3, 0.3], [0.5, 0.5], SystemFunction.series(2))
    with pytest.raises(GameError):
        MaintenanceSubsidy.per_agent([-0.1, 0.0])
    with pytest.raises(GameError):
        MaintenanceSubsidy.per_agent([1.5, 0.0]).check(game)
    with pytest.raises(GameError):
        MaintenanceSubsidy.per_agent([0.1]).check(game)
    cond = MaintenanceSubsidy.conditional([0, 0], [0, 0.1], [0.2, 0])
    assert cond.vector((0, 0)).tolist() == [0.2, 0.0]
    assert cond.vector((0, 1)).tolist() == [0.0, 0.1]
    assert cond.vector(None).tolist() == [0.0, 0.0]


def commute_game():
    return CostSharingGame(
        2, ("A", "B", "C", "D"), ({0, 1}, {1}, {1}, {0}),
        ((0.5, [5, 2, 6, 4]), (0.5, [5, 6, 2, 4])),
    )


def test_csg_costs_and_posteriors():
    g = commute_game()
    assert g.expected_costs().tolist() == [5, 4, 4, 4]
    assert csg_cost(g, ["A", "A"]).tolist() == [2.5, 2.5]
    assert csg_cost(g, ["D", "B"], None, ("B", 2)).tolist() == [4, 2]
    assert g.branches("B") == [(2.0, 0.5), (6.0, 0.5)]
    with pytest.raises(InconsistentRevelation, match="inconsistent revelation"):
        g.expected_costs(("B", 3.0))
    with pytest.raises(GameError):
        csg_cost(g, ["B", "A"])  # agent 0 cannot use B


def test_csg_subsidy_shared_by_users():
    g = commute_game()
    s = CsgSubsidy.from_dict(g, {"A": 3.0})
    assert csg_cost(g, ["A", "A"], s).tolist() == [1.0, 1.0]
    assert csg_cost(g, ["D", "A"], s).tolist() == [4.0, 2.0]
    assert s.paid(g, ["A", "A"]) == 3.0
    assert s.paid(g, ["D", "B"]) == 0.0
    with pytest.raises(GameError):
        CsgSubsidy.from_dict(g, {"A": 100.0}).check(g)


def test_csg_schema_errors():
    with pytest.raises(GameError):
        CostSharingGame(2, ("A",), ({0},), ((1.0, [1.0]),))  # agent 1 has no action
    with pytest.raises(GameError):
        CostSharingGame(1, ("A",), ({0},), ((0.5, [1.0]),))
    with pytest.raises(GameError):
        CostSharingGame(1, ("A", "A"), ({0}, {0}), ((1.0, [1.0, 1.0]),))


def test_json_round_trip():
    game = MaintenanceGame([0.3, -0.2, 0.1], [0.5, 0.2, 0.9], SystemFunction.cnf(3, [[1, 2], [3]]))
    back = parse_game(json.loads(canonical_json(game.to_json())))
    np.testing.assert_array_equal(back.costs, game.costs)
    np.testing.assert_array_equal(back.table(), game.table())
    g = commute_game()
    back = parse_game(json.loads(canonical_json(g.to_json())))
    assert back.actions == g.actions and back.avail == g.avail
    np.testing.assert_array_equal(back.expected_costs(), g.expected_costs())


@pytest.mark.parametrize("doc", [
    {},
    {"type": "maintenance", "n": 2, "costs": [0.1, 0.1], "p": [0.5, 0.5]},
    {"type": "maintenance", "n": 2, "costs": [0.1], "p": [0.5, 0.5], "phi": {"kind": "cnf", "clauses": [[1]]}},
    {"type": "maintenance", "n": 2, "costs": [0.1, 0.1], "p": [0.5, 0.5], "phi": {"kind": "xor"}},
    {"type": "cost_sharing", "agents": 1, "actions": [{"id": "A", "avail": [0]}], "worlds": [{"prob": 1, "costs": {}}]},
    {"type": "other"},
])
def test_parse_game_schema_errors(doc):
    with pytest.raises(GameError):
        parse_game(doc)


def test_canonical_json_rounds_to_twelve_digits():
    assert canonical_json({"b": 0.1 + 0.2, "a": [1e-17, -0.0]}) == '{"a":[1e-17,0.0],"b":0.3}'
