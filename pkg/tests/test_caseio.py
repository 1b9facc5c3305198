import json
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from numpy.testing import assert_allclose

from _fixtures import attacked_case
from gridverify.attack import AttackScenario
from gridverify.caseio import (
    METRICS_HEADER,
    DanglingReference,
    DisconnectedCase,
    MetricsRow,
    ParseError,
    SchemaError,
    bundled_case_path,
    parse_case,
    parse_case_file,
    read_metrics,
    read_results,
    read_scenario,
    scenario_from_json,
    scenario_to_json,
    write_metrics,
    write_results,
    write_scenario,
)

SMALL_CASE = """\
function mpc = case3
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
    1 3 0  0 0 0 1 1 0 115 1 1.1 0.9;
    2 1 50 0 0 0 1 1 0 115 1 1.1 0.9;
    3 1 50 0 0 0 1 1 0 115 1 1.1 0.9;
];
mpc.gen = [
    1 120 0 0 0 1 100 1 200 0;
];
mpc.branch = [
    1 2 0.01 0.2 0 0 0 0 0 0 1 -360 360;
    1 2 0.01 0.2 0 0 0 0 0 0 1 -360 360;  % parallel circuit
    2 3 0.01 0.1 0 0 0 0 0 0 1 -360 360;
    1 3 0.01 0.1 0 0 0 0 0 0 0 -360 360;  % out of service
];
"""

JSON_CASE = json.dumps(
    {
        "version": 1,
        "bus": [
            {"id": 1, "type": 3, "pd": 0.0},
            {"id": 2, "type": 1, "pd": 50.0},
            {"id": 3, "type": 1, "pd": 50.0},
        ],
        "gen": [{"bus": 1, "pg": 120.0}],
        "branch": [
            {"from": 1, "to": 2, "x": 0.2},
            {"from": 1, "to": 2, "x": 0.2},
            {"from": 2, "to": 3, "x": 0.1},
            {"from": 1, "to": 3, "x": 0.1, "status": 0},
        ],
    }
)


def test_parse_small_case():
    top = parse_case(SMALL_CASE)
    assert top.node_ids == (1, 2, 3)
    # Two parallel x=0.2 circuits merge into r=0.1; the dead branch is gone.
    assert top.endpoints == ((1, 2), (2, 3))
    assert_allclose(top.reactance, [0.1, 0.1])
    # Slack absorbed the 20 MW surplus: 120 - 20 = 100.
    assert_allclose(top.injections, [100.0, -50.0, -50.0])


def test_json_mirror_matches_matpower():
    a = parse_case(SMALL_CASE)
    b = parse_case(JSON_CASE)
    assert a.node_ids == b.node_ids
    assert a.endpoints == b.endpoints
    assert_allclose(a.injections, b.injections)
    assert_allclose(a.reactance, b.reactance)


def test_load_only_bus_is_negative():
    top = parse_case(SMALL_CASE)
    assert top.injection(2) == -50.0


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_case("function mpc = broken\n")
    with pytest.raises(ParseError):
        parse_case(SMALL_CASE.replace("1 120 0 0 0 1 100 1 200 0;", ""))  # no gens
    with pytest.raises(DanglingReference):
        parse_case(SMALL_CASE.replace("1 120 0", "9 120 0"))
    with pytest.raises(ParseError):
        parse_case(SMALL_CASE.replace("1 3 0 ", "1 1 0 "))  # slack demoted
    with pytest.raises(ParseError):
        parse_case(SMALL_CASE.replace("2 3 0.01 0.1", "2 3 0.01 0.0"))
    with pytest.raises(DisconnectedCase):
        parse_case(
            SMALL_CASE.replace(
                "    2 3 0.01 0.1 0 0 0 0 0 0 1 -360 360;\n", ""
            )
        )


def test_bundled_case_parses():
    top = parse_case_file(bundled_case_path())
    assert top.n_nodes == 300
    assert top.n_links == 411
    scale = float(np.abs(top.injections).max())
    assert abs(top.injections.sum()) < 1e-9 * scale


# ---------------------------------------------------------------------------
# scenario files


@given(attacked_case())
@settings(max_examples=50, deadline=None)
def test_scenario_json_round_trip(case):
    top, scen = case
    doc = scenario_to_json(scen, "unit-case")
    back, case_id = scenario_from_json(json.loads(json.dumps(doc)), top)
    assert case_id == "unit-case"
    assert back == scen


def test_scenario_file_round_trip(tmp_path):
    top = parse_case(SMALL_CASE)
    scen = AttackScenario(
        v_h=frozenset({1, 2, 3}), e_h=frozenset({1, 2}), f=frozenset({2}), seed=42
    )
    path = tmp_path / "scenario.json"
    write_scenario(scen, "case3", path)
    back, case_id = read_scenario(path, top)
    assert back == scen
    assert case_id == "case3"


def test_scenario_schema_violations():
    top = parse_case(SMALL_CASE)
    good = scenario_to_json(
        AttackScenario(v_h=frozenset({1, 2}), e_h=frozenset({1}), f=frozenset()),
        "case3",
    )
    bad_version = dict(good, version=99)
    with pytest.raises(SchemaError):
        scenario_from_json(bad_version, top)
    bad_nodes = dict(good, v_h=[1, 77])
    with pytest.raises(SchemaError):
        scenario_from_json(bad_nodes, top)


# ---------------------------------------------------------------------------
# results files


def _stub_ledger(records):
    return SimpleNamespace(rows=lambda: records)


def _rec(link, estimated="operational", verified=False, method=None, identifiable=True):
    return SimpleNamespace(
        link=link,
        estimated=estimated,
        verified=verified,
        method=method,
        identifiable=identifiable,
    )


def test_results_round_trip(tmp_path):
    scen = AttackScenario(
        v_h=frozenset({1, 2, 3}), e_h=frozenset({1, 2}), f=frozenset({1})
    )
    records = [
        _rec(1, estimated="failed", verified=True, method="cut1"),
        _rec(2),
    ]
    path = tmp_path / "ledger.jsonl"
    write_results(_stub_ledger(records), scen, path)
    rows = read_results(path)
    assert rows == [
        {
            "link": 1,
            "estimated": "failed",
            "verified": True,
            "method": "cut1",
            "identifiable": True,
        },
        {
            "link": 2,
            "estimated": "operational",
            "verified": False,
            "method": None,
            "identifiable": True,
        },
    ]


def test_results_empty_area(tmp_path):
    scen = AttackScenario(v_h=frozenset({1}), e_h=frozenset(), f=frozenset())
    path = tmp_path / "empty.jsonl"
    write_results(_stub_ledger([]), scen, path)
    assert read_results(path) == []


def test_results_must_cover_area(tmp_path):
    scen = AttackScenario(
        v_h=frozenset({1, 2, 3}), e_h=frozenset({1, 2}), f=frozenset()
    )
    with pytest.raises(ValueError):
        write_results(_stub_ledger([_rec(1)]), scen, tmp_path / "x.jsonl")


# ---------------------------------------------------------------------------
# metrics files


def _row(i=0, **over):
    base = dict(
        scenario_id=f"t{i}",
        area_size=20,
        n_links=25,
        n_failed=4,
        connected=True,
        n_identifiable_failed=4,
        n_identifiable_operational=20,
        testable_failed=3,
        verified_failed=3,
        testable_operational=15,
        verified_operational=10,
        alg2_added_failed=1,
        alg2_added_operational=2,
        guaranteed_failed=3,
        guaranteed_operational=12,
        precision=1.0,
        recall=0.75,
    )
    base.update(over)
    return MetricsRow(**base)


def test_metrics_header_only(tmp_path):
    path = tmp_path / "m.csv"
    write_metrics([], path)
    text = path.read_bytes()
    assert text == (",".join(METRICS_HEADER) + "\n").encode()
    assert read_metrics(path) == []


def test_metrics_round_trip(tmp_path):
    rows = [_row(0), _row(1, connected=False, precision=1 / 3, recall=2 / 3)]
    path = tmp_path / "m.csv"
    write_metrics(rows, path)
    back = read_metrics(path)
    assert back[0] == rows[0]
    assert back[1].connected is False
    assert back[1].precision == pytest.approx(1 / 3, abs=1e-6)
    # Floats serialized to 6 decimals, LF endings.
    text = path.read_text()
    assert "0.333333" in text
    assert "\r" not in text


def test_metrics_schema_checks(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("not,a,metrics,file\n1,2,3,4\n")
    with pytest.raises(SchemaError):
        read_metrics(path)
    with pytest.raises(ValueError):
        _row(0, verified_failed=99)  # exceeds n_links
    with pytest.raises(ValueError):
        _row(0, precision=1.5)
