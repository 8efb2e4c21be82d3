import pytest

from subsidylab.golden import EXPECTED, load_fixture, run_golden


def test_all_cells_and_claims_pass():
    report = run_golden()
    failed = [c for c in report["cells"] + report["claims"] if not c["ok"]]
    assert not failed, failed
    assert report["seconds"] < 1.0


def test_cell_counts():
    counts = run_golden()["counts"]
    assert counts["symmetric_series"] == 8
    assert counts["inspection_series"] == 24
    # 18 state rows, each with two agent costs
    assert counts["commute"] == 36


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_fixtures_load(name):
    game = load_fixture(name)
    assert game.bound > 0


def test_mismatch_is_reported(monkeypatch):
    import subsidylab.golden as golden

    table = dict(golden.EXPECTED["symmetric_series"]["prior"][1])
    table["DN-DN"] = (0.75, 0.7500001)
    monkeypatch.setitem(golden.EXPECTED, "symmetric_series", {"prior": (None, table)})
    report = run_golden()
    assert not report["passed"]
    assert sum(not c["ok"] for c in report["cells"]) == 1
