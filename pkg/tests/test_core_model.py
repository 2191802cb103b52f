import dataclasses

import pytest
from hypothesis import given, strategies as st

from h2grid.core_model import (DispatchSolution, DnLine, H2System, OutageEvent, ScenarioTimeline, from_jsonable,
                               to_jsonable, validate_scenario, validate_solution, vname)
from h2grid.misocp import Block, ProblemIR, aff


def errors(sc):
    return validate_scenario(sc.network, sc.tn, sc.fleet, sc.timeline)


def test_bundled_cases_are_valid(case33, tutorial):
    assert errors(case33) == []
    assert errors(tutorial) == []


def test_negative_resistance_rejected(tutorial):
    ln = tutorial.network.lines
    net = dataclasses.replace(tutorial.network, lines=(dataclasses.replace(ln[0], resistance=-0.1), ln[1]))
    assert any("negative impedance" in e for e in errors(tutorial.replace(network=net)))


def test_meshed_feeder_rejected(tutorial):
    net = tutorial.network
    net = dataclasses.replace(net, lines=net.lines + (DnLine(1, 3, 0.01, 0.01, 1.0),))
    assert any("radial" in e for e in errors(tutorial.replace(network=net)))


def test_unknown_failed_asset(tutorial):
    tl = dataclasses.replace(tutorial.timeline, outage_events=(OutageEvent(1, 2, True, ("DG9",)),))
    assert any("unknown asset" in e for e in errors(tutorial.replace(timeline=tl)))


def test_kappa_range(tutorial):
    tl = dataclasses.replace(tutorial.timeline, kappa=(0.0, 1.5))
    assert "kappa out of [0,1]" in errors(tutorial.replace(timeline=tl))


def test_h2_make_is_consistent():
    h = H2System.make("H", 1, el_p_max=0.7, fc_p_max=0.4)
    assert h.el_kg_max == pytest.approx(h.el_conv * h.el_eff * h.el_p_max)
    assert h.fc_kg_max * h.mwh_per_kg == pytest.approx(h.fc_p_max)


def test_json_roundtrip(case33):
    back = from_jsonable(type(case33.network), to_jsonable(case33.network))
    assert back == case33.network
    fl = from_jsonable(type(case33.fleet), to_jsonable(case33.fleet))
    assert fl == case33.fleet


def test_timeline_flags():
    tl = ScenarioTimeline(horizon_hours=4, dn_load=(), fcev_demand={}, cbdr=(0,) * 4, kappa=(0,) * 4,
                          dso_bid_price=(1,) * 4, dso_offer_price=(2,) * 4,
                          outage_events=(OutageEvent(2, 3, True, ("X",)),))
    assert [tl.emergency(t) for t in tl.hours] == [False, True, True, False]
    assert [tl.tie_live(t) for t in tl.hours] == [True, False, False, True]
    assert tl.failed("X", 3) and not tl.failed("X", 4)
    assert tl.sell_price(1) == 2


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_validate_solution_detects_row_and_cone(x, y):
    b = Block("t")
    b.var("x", -5, 5)
    b.var("y", -5, 5)
    b.row("sum", {"x": 1, "y": 1}, "<=", 1.0)
    b.soc("ball", aff(const=2.0), [aff({"x": 1}), aff({"y": 1})])
    ir = ProblemIR.from_blocks([b])
    kinds = {v.kind for v in validate_solution({"x": x, "y": y}, ir, 1e-9)}
    assert ("row" in kinds) == (x + y > 1 + 1e-9 * (1 + max(1, abs(x), abs(y))))
    assert ("cone" in kinds) == (2 - (x * x + y * y) ** 0.5 < -1e-9 * (1 + max(2, abs(x), abs(y))))


def test_validate_solution_needs_all_variables():
    b = Block("t")
    b.var("x")
    with pytest.raises(ValueError, match="missing"):
        validate_solution({}, ProblemIR.from_blocks([b]))


def test_solution_accessors():
    sol = DispatchSolution(hours=(1, 2), values={vname("a", 1): 1.0, vname("a", 2): 2.0})
    assert sol.series("a") == [1.0, 2.0]
    assert sol.get("b", 1, default=0.0) == 0.0
