"""Distribution and transmission model blocks on the tutorial instance."""
import dataclasses
import math

import pytest

from h2grid import dn_builder as dn
from h2grid import tn_builder as tnb
from h2grid.core_model import OutageEvent, validate_solution
from h2grid.misocp import ModelError, SolveOptions, fix_binaries_and_resolve
from h2grid.model import ModelOptions, build_window_model, solve_window


def test_tutorial_counts(tutorial_solved):
    wm, res, sol = tutorial_solved
    assert wm.ir.counts()["binaries"] == 6
    assert res.status == "optimal"
    assert validate_solution(sol, wm.ir, 1e-6) == []


def test_strong_duality_at_incumbent(tutorial_solved):
    wm, _, sol = tutorial_solved
    p, d = tnb.ll_objectives(sol.values, wm.primal, wm.dual)
    assert tnb.assert_strong_duality(p, d) <= 1e-6 * (1 + abs(p))


def test_purchase_term_equals_price_times_quantity(tutorial_solved):
    wm, _, sol = tutorial_solved
    for t in wm.timeline.hours:
        terms = wm.lin.exchange_terms[t]
        linear = sum(c * sol.values[v] for v, c in terms.items())
        lam = sol.values[f"du.lam[{wm.scenario.tn.dn_coupling_bus}]@{t}"]
        assert linear == pytest.approx(lam * sol.values[f"ex.buy@{t}"], abs=1e-6)


def test_big_m_below_bound_rejected(tutorial):
    m = tnb.big_m(tutorial.network, tutorial.tn, tutorial.timeline)
    with pytest.raises(ModelError, match="below the validity bound"):
        build_window_model(tutorial, options=ModelOptions(big_m=0.5 * m))


def test_u_zero_forces_k_zero(tutorial_solved):
    wm, _, sol = tutorial_solved
    for t in wm.timeline.hours:
        if sol.values[f"ex.u@{t}"] < 0.5:
            assert abs(sol.values[f"lin.k@{t}"]) <= 1e-6


def test_infeasible_cbdr_signal(tutorial):
    tl = dataclasses.replace(tutorial.timeline, cbdr=(5.0, 0.0))
    with pytest.raises(dn.InfeasibleSignal, match="hour 1"):
        build_window_model(tutorial.replace(timeline=tl))


def test_cbdr_signal_respected(tutorial):
    tl = dataclasses.replace(tutorial.timeline, cbdr=(0.0, -0.05))
    wm = build_window_model(tutorial.replace(timeline=tl))
    res, sol = solve_window(wm, SolveOptions(gap=1e-9))
    assert sol.values["h2[HS1].p_fc@2"] >= 0.05 - 1e-7


def test_outage_disconnects_tie(tutorial):
    tl = dataclasses.replace(tutorial.timeline, outage_events=(OutageEvent(2, 2, True, ("DG1",)),))
    wm = build_window_model(tutorial.replace(timeline=tl))
    res, sol = solve_window(wm, SolveOptions(gap=1e-9))
    assert res.ok
    assert sol.values["ex.buy@2"] == 0 and sol.values["ex.sell@2"] == 0
    assert sol.values["dg[DG1].p@2"] == 0
    # no startup cost is charged for a forced outage ramp
    assert "dg[DG1].ru@2" not in {r.name for r in wm.ir.rows}


def test_h2_balance_closes(tutorial_solved):
    wm, _, sol = tutorial_solved
    h = wm.scenario.fleet.h2[0]
    prev = h.initial_mass
    for t in wm.timeline.hours:
        v = lambda s: sol.values[f"h2[{h.name}].{s}@{t}"]
        dem = wm.timeline.at(wm.timeline.fcev_demand[h.name], t)
        lhs = v("mass") * (1 + h.dissipation)
        rhs = prev + v("qh_el") - dem + v("el_shed") * h.kg_per_mwh - v("qh_fc")
        assert abs(lhs - rhs) <= 1e-6
        prev = v("mass")


def test_conic_relaxation_is_tight(tutorial_solved):
    wm, _, sol = tutorial_solved
    for t in wm.timeline.hours:
        for ln in wm.scenario.network.lines:
            j = ln.to_node
            fp, fq, a = (sol.values[f"ln[{j}].{s}@{t}"] for s in ("fp", "fq", "a"))
            v = sol.values[f"nd[{ln.from_node}].v@{t}"]
            if math.hypot(fp, fq) > 1e-4:
                assert -1e-5 <= a * v - (fp * fp + fq * fq) <= 1e-4


def test_fixed_resolve_reproduces_incumbent(tutorial_solved):
    wm, res, _ = tutorial_solved
    ass = {wm.ir.variables[i].name: res.x[wm.ir.variables[i].name] for i in wm.ir.binaries}
    again = fix_binaries_and_resolve(wm.ir, ass)
    assert again.objective == pytest.approx(res.objective, rel=1e-7)


def test_missing_price_series(tutorial):
    tl = dataclasses.replace(tutorial.timeline, dso_bid_price=(36.0,))
    with pytest.raises((ModelError, IndexError)):
        build_window_model(tutorial.replace(timeline=tl))
