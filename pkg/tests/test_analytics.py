import dataclasses
import math

import pytest
from hypothesis import given, strategies as st

from h2grid import analytics as an
from h2grid.core_model import DispatchSolution, H2System
from h2grid.misocp import ModelError
from h2grid.model import build_window_model, solve_window
from h2grid.misocp import SolveOptions


def h2_solution(p_el, k):
    vals = {}
    for t, p in enumerate(p_el, start=1):
        vals[f"h2[H].p_el@{t}"] = p
        vals[f"h2[H].qh_el@{t}"] = p * k
    return DispatchSolution(hours=tuple(range(1, len(p_el) + 1)), values=vals)


def flat(price, hours, node=1):
    return an.DlmpSeries({(node, t): an.DlmpPoint(price, price, 0.0, 0.0, 0.0) for t in hours})


H = H2System.make("H", 1, el_p_max=0.5, el_conv=20.0, el_eff=0.7)


def test_capacity_factor_trivial():
    assert an.compute_capacity_factor(h2_solution([0.5] * 4, 14), H) == pytest.approx(1.0)
    assert an.compute_capacity_factor(h2_solution([0.25] * 4, 14), H) == pytest.approx(0.5)
    with pytest.raises(ValueError, match="zero-length"):
        an.compute_capacity_factor(h2_solution([0.5], 14), H, hours=[])


@given(st.lists(st.floats(0, 0.5), min_size=1, max_size=24))
def test_capacity_factor_in_unit_interval(p):
    assert 0.0 <= an.compute_capacity_factor(h2_solution(p, 14), H) <= 1.0


def test_h2_cost_flat_price():
    sol = h2_solution([0.5, 0.5], H.kg_per_mwh)
    rep = an.compute_h2_cost(sol, flat(50.0, (1, 2)), H, params=an.StorageCostParams(capex_per_kg=0.0))
    assert H.kg_per_mwh == pytest.approx(14.0)
    assert rep.electrolysis_cost == pytest.approx(50 / 14)
    assert rep.production_cost == rep.electrolysis_cost + rep.storage_cost


def test_h2_cost_zero_price_is_storage_only():
    sol = h2_solution([0.5, 0.2], H.kg_per_mwh)
    rep = an.compute_h2_cost(sol, flat(0.0, (1, 2)), H)
    assert rep.electrolysis_cost == 0.0
    assert rep.production_cost == rep.storage_cost > 0


def test_h2_cost_not_applicable_without_production():
    rep = an.compute_h2_cost(h2_solution([0.0, 0.0], 14), flat(40.0, (1, 2)), H)
    assert not rep.applicable and math.isnan(rep.production_cost)


@given(st.floats(0, 500), st.floats(0, 5))
def test_cost_additivity_exact(e, s):
    r = an.H2CostReport("H", 0.5, e, s)
    assert r.production_cost == e + s


def test_resilience_arithmetic():
    assert an.compute_resilience_index(52.87, total_load=84.3).ri == pytest.approx(37.28, abs=0.01)
    assert an.compute_resilience_index({"critical": 0.0}, total_load=10.0).ri == 100.0
    with pytest.raises(ValueError, match="zero total load"):
        an.compute_resilience_index(0.0, total_load=0.0)
    with pytest.raises(ValueError):
        an.compute_resilience_index(11.0, total_load=10.0)


@given(st.floats(0, 1), st.floats(0.1, 1000))
def test_resilience_range(frac, load):
    r = an.compute_resilience_index(frac * load, total_load=load)
    assert 0.0 <= r.ri <= 100.0
    assert (r.ri == 100.0) == (r.total_ens == 0.0)


def test_resilience_from_solution(tutorial):
    tl = tutorial.timeline
    sol = DispatchSolution(hours=(1, 2), values={"nd[2].shed_p@2": 0.25, "nd[3].shed_p@2": 0.0,
                                                 "nd[2].shed_p@1": 0.0, "nd[3].shed_p@1": 0.0})
    r = an.compute_resilience_index(sol, (2, 2), timeline=tl)
    assert r.total_load == pytest.approx(1.1)
    assert r.ens_by_tier["non_critical"] == pytest.approx(0.25)
    assert r.ri == pytest.approx(100 * 0.85 / 1.1)
    with pytest.raises(ValueError, match="outside"):
        an.compute_resilience_index(sol, (2, 3), timeline=tl)


def test_dlmp_needs_duals(tutorial):
    with pytest.raises(ModelError, match="no duals"):
        an.compute_dlmp(DispatchSolution(hours=(1,), values={}), tutorial.network)


def test_dlmp_zero_impedance_is_flat(tutorial):
    net = tutorial.network
    lines = tuple(dataclasses.replace(ln, resistance=0.0, reactance=0.0) for ln in net.lines)
    sc = tutorial.replace(network=dataclasses.replace(net, lines=lines))
    wm = build_window_model(sc)
    _, sol = solve_window(wm, SolveOptions(gap=1e-9))
    d = an.compute_dlmp(sol, sc.network)
    for t in sc.timeline.hours:
        for n in sc.network.nodes:
            assert d.price(n, t) == pytest.approx(d.price(sc.network.root_node, t), abs=1e-6)


def test_dlmp_lossy_downstream_higher(day_window):
    sc, wm, res, sol = day_window
    d = an.compute_dlmp(sol, sc.network)
    t = 12
    assert d.price(18, t) > d.price(1, t)
    p = d.points[(18, t)]
    assert p.loss > 0 and abs(p.residual) <= 1e-4 * (1 + abs(p.total))


def test_battery_fleet_mirrors_h2(case33):
    f = an.battery_fleet(case33.fleet, 4)
    assert not f.h2 and len(f.batteries) == len(case33.fleet.h2)
    for b, h in zip(f.batteries, case33.fleet.h2):
        assert b.node == h.node and b.p_rating == h.el_p_max and b.capacity == 4 * h.el_p_max
        assert b.one_way_eff ** 2 == pytest.approx(0.90)


def test_table_rows_fixed_layout():
    rep = an.compute_resilience_index({"critical": 1.0, "moderately_critical": 2.0, "non_critical": 3.0},
                                      total_load=12.0)
    case = an.ComparisonCase("battery 2h", 2.0, rep, {}, 0.0, 0.0)
    row = an.table_i_rows([case])[0]
    assert len(row) == len(an.TABLE_I_COLUMNS)
    assert row[-1] == "50.000000"
