import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from h2grid.misocp import (Block, ModelError, ProblemIR, SolveOptions, aff, elastic_report,
                           fix_binaries_and_resolve, relative_gap, solve)


def knapsack(values, weights, cap):
    b = Block("k")
    xs = [b.var(f"x{i}", 0, 1, "B") for i in range(len(values))]
    b.row("cap", {x: w for x, w in zip(xs, weights)}, "<=", cap)
    for x, v in zip(xs, values):
        b.cost(x, -v)
    return ProblemIR.from_blocks([b]), xs


def brute(values, weights, cap):
    best = 0.0
    for bits in itertools.product((0, 1), repeat=len(values)):
        if sum(w * s for w, s in zip(weights, bits)) <= cap:
            best = max(best, sum(v * s for v, s in zip(values, bits)))
    return -best


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 20), st.integers(1, 10)), min_size=1, max_size=7),
       st.integers(1, 30))
def test_knapsack_matches_enumeration(items, cap):
    values, weights = zip(*items)
    ir, _ = knapsack(values, weights, cap)
    res = solve(ir, SolveOptions(gap=1e-9))
    assert res.status == "optimal"
    assert res.objective == pytest.approx(brute(values, weights, cap), abs=1e-6)
    assert res.bound <= res.objective + 1e-6


def test_soc_with_binary():
    # min -x - y  s.t. ||(x, y)|| <= 1 + z, z binary costing 0.5
    b = Block("s")
    x, y = b.var("x"), b.var("y")
    z = b.var("z", 0, 1, "B")
    b.soc("c", aff({z: 1}, 1.0), [aff({x: 1}), aff({y: 1})])
    b.cost(x, -1)
    b.cost(y, -1)
    b.cost(z, 0.5)
    res = solve(ProblemIR.from_blocks([b]), SolveOptions(gap=1e-9))
    assert res["z"] == pytest.approx(1.0)
    assert res.objective == pytest.approx(-2 * math.sqrt(2) + 0.5, abs=1e-6)


def test_rsoc_convention():
    b = Block("r")
    a, v = b.var("a", 0), b.var("v", 0, 2)
    f = b.var("f", 3, 3)
    b.rsoc("q", aff({a: 1}), aff({v: 1}), [aff({f: 1})])
    b.cost(a, 1)
    res = solve(ProblemIR.from_blocks([b]))
    assert res["a"] == pytest.approx(4.5, rel=1e-6)


def test_row_duals_are_sensitivities():
    b = Block("lp")
    x = b.var("x", 0)
    b.row("need", {x: 1}, ">=", 2.0)
    b.cost(x, 3.0)
    ir = ProblemIR.from_blocks([b])
    res = fix_binaries_and_resolve(ir, {})
    assert res.row_duals["need"] == pytest.approx(3.0, rel=1e-6)
    bumped = fix_binaries_and_resolve(ir.with_rhs({"need": 2.5}), {})
    assert bumped.objective - res.objective == pytest.approx(1.5, rel=1e-6)


def test_pinned_variable_is_exact():
    # mode fixed to 0 forces q to exactly zero, not to an interior-point hair
    b = Block("m")
    m = b.var("m", 0, 0, "B")
    q = b.var("q", 0, 5)
    b.row("q_max", {q: 1, m: -5}, "<=", 0)
    b.cost(q, -1)
    res = solve(ProblemIR.from_blocks([b]))
    assert res["q"] == 0.0


def test_relative_gap():
    assert relative_gap(math.inf, 3.0) == math.inf
    assert relative_gap(10.0, math.inf) == 0.0
    assert relative_gap(10.0, 9.0) == pytest.approx(0.1)
    assert relative_gap(0.5, 0.4) == pytest.approx(0.1)


def test_infeasible_reported_with_elastic_rows():
    b = Block("bad")
    x = b.var("x", 0, 1)
    b.row("too_much", {x: 1}, ">=", 2.0)
    ir = ProblemIR.from_blocks([b])
    assert solve(ir).status == "infeasible"
    rep = elastic_report(ir)
    assert rep and rep[0][0] == "too_much" and rep[0][1] == pytest.approx(1.0, abs=1e-5)


def test_namespace_collision():
    a, b = Block("a"), Block("b")
    a.var("x")
    b.var("x")
    with pytest.raises(ModelError, match="collision"):
        ProblemIR.from_blocks([a, b])


def test_undeclared_variable():
    a = Block("a")
    a.row("r", {"ghost": 1}, "<=", 1)
    with pytest.raises(ModelError, match="undeclared"):
        ProblemIR.from_blocks([a])


def test_dump_is_deterministic():
    ir1, _ = knapsack((3, 4, 5), (2, 3, 4), 5)
    ir2, _ = knapsack((3, 4, 5), (2, 3, 4), 5)
    assert ir1.dump() == ir2.dump()


def test_search_is_deterministic():
    rng = np.random.default_rng(3)
    vals, wts = rng.integers(1, 30, 12).tolist(), rng.integers(1, 15, 12).tolist()
    ir, _ = knapsack(vals, wts, 40)
    r1, r2 = solve(ir, SolveOptions(gap=1e-9)), solve(ir, SolveOptions(gap=1e-9))
    assert r1.x == r2.x and r1.tree == r2.tree
