
import numpy as np
import pytest

from subsidylab.equilibrium import enumerate_nash
from subsidylab.errors import CapExceeded, GameError
from subsidylab.metrics import achieves_optimum
from subsidylab.reductions import (
    Graph,
    SetCoverInstance,
    brute_sc,
    brute_vc,
    connected_graphs,
    cover_witness_subsidy,
    min_set_cover,
    min_vertex_cover,
    random_set_cover,
    sc_to_csg_poas,
    vc_to_cig_voi,
    vc_to_cmg_poas,
    vc_to_cmg_system,
    verify_many,
    verify_reduction,
)

K3 = Graph(3, ((0, 1), (1, 2), (0, 2)))
P3 = Graph(3, ((0, 1), (1, 2)))


def test_graph_validation():
    with pytest.raises(GameError):
        Graph(2, ((0, 0),))
    with pytest.raises(GameError):
        Graph(2, ((0, 2),))
    assert Graph(3, ((1, 0), (0, 1))).edges == ((0, 1),)
    with pytest.raises(GameError):
        SetCoverInstance(3, [[]], 1)


def test_vertex_cover_oracle():
    assert len(min_vertex_cover(K3)) == 2
    assert min_vertex_cover(P3) == (1,)
    assert brute_vc(P3, 1) and not brute_vc(K3, 1)
    with pytest.raises(CapExceeded):
        min_vertex_cover(Graph(20, ()), cap=16)


def test_set_cover_oracle():
    inst = SetCoverInstance(4, [[0, 1], [2, 3], [1, 2]], 2)
    assert min_set_cover(inst) == (0, 1)
    assert brute_sc(inst)
    assert not brute_sc(SetCoverInstance(3, [[0]], 3))


def _minimal_covers(g):
    covers = []
    for bits in range(1 << g.n):
        c = {i for i in range(g.n) if bits >> i & 1}
        if all(u in c or v in c for u, v in g.edges):
            if all(not all(u in c - {x} or v in c - {x} for u, v in g.edges) for x in c):
                covers.append(bits)
    return covers


@pytest.mark.parametrize("g", connected_graphs(5), ids=lambda g: f"n{g.n}e{len(g.edges)}")
def test_poas_game_equilibria_are_empty_or_minimal_covers(g):
    game, _ = vc_to_cmg_poas(g, 0)
    got = set(enumerate_nash(game).indices.tolist())
    want = set(_minimal_covers(g))
    if g.edges:
        want.add(0)
    assert got == want


def test_small_graph_examples():
    for kind in ("cmg-poas", "cmg-system"):
        assert verify_reduction(kind, K3, 2)["game_decision"]
        assert not verify_reduction(kind, K3, 1)["game_decision"]
        assert verify_reduction(kind, P3, 1)["game_decision"]
        assert not verify_reduction(kind, P3, 0)["game_decision"]


def test_cover_witness_forces_the_cover():
    game, _ = vc_to_cmg_poas(P3, 1)
    from subsidylab.game import MaintenanceSubsidy

    s = MaintenanceSubsidy.per_agent(cover_witness_subsidy(P3, [1]))
    assert enumerate_nash(game, s).indices.tolist() == [0b010]
    assert achieves_optimum(game, s)


def test_system_budget_edge_cases():
    _, b = vc_to_cmg_system(Graph(1, ()), 0)
    assert b == 0.0
    _, b = vc_to_cmg_system(P3, 0)
    assert b < 0
    assert not verify_reduction("cmg-system", P3, 0)["game_decision"]


def test_experimental_constructions_need_opt_in():
    with pytest.raises(GameError):
        vc_to_cig_voi(P3, 1)
    game, budget, inspected = vc_to_cig_voi(P3, 1, experimental=True)
    assert game.n == 4 and inspected == 3 and budget == 1.0
    with pytest.raises(GameError):
        verify_reduction("nope", P3, 1)


@pytest.mark.parametrize("kind", ["cmg-poas", "cmg-system"])
def test_reductions_agree_on_small_connected_graphs(kind):
    cases = [(g, k) for g in connected_graphs(5) for k in range(g.n + 1)]
    results = verify_many(kind, cases)
    assert all(r["agree"] for r in results)


def test_csg_game_shape():
    inst = SetCoverInstance(3, [[1, 2], [0, 1]], 1)
    game, n_star = sc_to_csg_poas(inst)
    assert n_star == 1
    assert game.actions == ("S0", "S1", "T0", "T1", "T2", "V")
    np.testing.assert_allclose(game.expected_costs(), [1, 1, 1, 1, 1, 2.5])


def test_csg_yes_instances_are_found():
    # every set-cover YES instance maps to a game YES; the converse can fail
    rng = np.random.default_rng(0)
    for _ in range(60):
        inst = random_set_cover(rng)
        r = verify_reduction("csg-poas", inst)
        if r["oracle"]:
            assert r["game_decision"]


def test_csg_known_counterexample():
    # subsidizing S0 by 1 leaves only optimal equilibria although no single set covers
    inst = SetCoverInstance(3, [[1, 2], [0, 1]], 1)
    r = verify_reduction("csg-poas", inst)
    assert not r["oracle"]
    assert r["game_decision"]


def test_verify_many_preserves_order():
    cases = [(P3, k) for k in range(4)]
    serial = verify_many("cmg-poas", cases, workers=1)
    pooled = verify_many("cmg-poas", cases, workers=3)
    assert serial == pooled
    assert [r["k"] for r in pooled] == [0, 1, 2, 3]


@pytest.mark.slow
def test_reductions_agree_on_seven_vertex_graphs():
    graphs = [g for g in connected_graphs(7) if g.n == 7]
    cases = [(g, k) for g in graphs for k in range(g.n + 1)]
    assert all(r["agree"] for r in verify_many("cmg-poas", cases))
