"""Enumeration oracle for small bi-level instances.

For every binary assignment (DG status, H2 mode, exchange direction per hour) the
transmission market is cleared as an LP with HiGHS, which fixes the exchange
quantities and the coupling-bus price; the distribution dispatch is then solved
as a conic program in cvxpy with those quantities fixed. Nothing here uses the
package's model builders.
"""
from __future__ import annotations

import itertools
import math

import cvxpy as cp
import numpy as np
from scipy.optimize import linprog

from h2grid.core_model import Scenario


def clear_market(sc: Scenario, t: int, u: int) -> tuple[float, float, float]:
    """Returns (buy, sell, coupling price) for hour ``t`` with direction ``u``."""
    tn, tl = sc.tn, sc.timeline
    cap = sc.network.exchange_limit if tl.tie_live(t) else 0.0
    i = t - tl.start_hour
    G, W, L, B = tn.generators, tn.wind_farms, tn.lines, tn.buses
    nv = len(G) + len(W) + len(L) + len(B) + 2
    ig = lambda k: k
    iw = lambda k: len(G) + k
    il = lambda k: len(G) + len(W) + k
    ib = lambda n: len(G) + len(W) + len(L) + B.index(n)
    ibuy, isell = nv - 2, nv - 1
    c = np.zeros(nv)
    for k, g in enumerate(G):
        c[ig(k)] = g.marginal_cost
    for k, w in enumerate(W):
        c[iw(k)] = w.marginal_cost
    c[ibuy] = -tl.dso_bid_price[i]
    c[isell] = tl.dso_offer_price[i]
    A, b = [], []
    loads = {ld.bus: ld.profile[i] for ld in tn.loads}
    for n in B:
        row = np.zeros(nv)
        for k, g in enumerate(G):
            row[ig(k)] += g.bus == n
        for k, w in enumerate(W):
            row[iw(k)] += w.bus == n
        for k, ln in enumerate(L):
            row[il(k)] += (ln.to_bus == n) - (ln.from_bus == n)
        if n == tn.dn_coupling_bus:
            row[ibuy], row[isell] = -1.0, 1.0
        A.append(row)
        b.append(loads.get(n, 0.0))
    for k, ln in enumerate(L):
        row = np.zeros(nv)
        row[il(k)] = 1.0
        row[ib(ln.from_bus)] = -1 / ln.reactance
        row[ib(ln.to_bus)] = 1 / ln.reactance
        A.append(row)
        b.append(0.0)
    bounds = [(g.p_min, g.p_max) for g in G] + [(0, w.availability[i]) for w in W]
    bounds += [(ln.flow_min, ln.flow_max) for ln in L]
    bounds += [(0, 0) if n == tn.ref_bus else (None, None) for n in B]
    bounds += [(0, cap * (1 - u)), (0, cap * u)]
    res = linprog(c, A_eq=np.array(A), b_eq=np.array(b), bounds=bounds, method="highs")
    assert res.status == 0, res.message
    price = res.eqlin.marginals[B.index(tn.dn_coupling_bus)]
    return float(res.x[ibuy]), float(res.x[isell]), float(price)


def dso_cost(sc: Scenario, status: dict, mode: dict, market: dict) -> float:
    """Distribution dispatch cost with binaries and exchange fixed; inf if infeasible."""
    net, fleet, tl = sc.network, sc.fleet, sc.timeline
    hours = list(tl.hours)
    mb = net.base_mva
    cons, cost = [], 0
    idx = {t: t - tl.start_hour for t in hours}
    v = {(n, t): cp.Variable() for n in net.nodes for t in hours}
    fp = {(ln.to_node, t): cp.Variable() for ln in net.lines for t in hours}
    fq = {(ln.to_node, t): cp.Variable() for ln in net.lines for t in hours}
    a = {(ln.to_node, t): cp.Variable(nonneg=True) for ln in net.lines for t in hours}
    inj_p = {(n, t): 0 for n in net.nodes for t in hours}
    inj_q = {(n, t): 0 for n in net.nodes for t in hours}

    for d in fleet.dgs:
        prev_x, prev_p = float(d.initial_status), d.initial_p if d.initial_status else 0.0
        for t in hours:
            x = status[(d.name, t)]
            p, q = cp.Variable(), cp.Variable()
            cons += [p >= d.p_min * x, p <= d.p_max * x, q >= d.q_min * x, q <= d.q_max * x,
                     cp.norm(cp.hstack([p, q])) <= d.s_rating, p - prev_p <= d.ramp_up, prev_p - p <= d.ramp_down]
            cost += d.fixed_cost * x + d.marginal_cost * p
            cost += d.startup_cost * max(x - prev_x, 0) + d.shutdown_cost * max(prev_x - x, 0)
            inj_p[(d.node, t)] += p
            inj_q[(d.node, t)] += q
            prev_x, prev_p = x, p
    for pv in fleet.pvs:
        for t in hours:
            p, q = cp.Variable(), cp.Variable()
            cons += [p >= 0, p <= pv.p_max_profile[idx[t]], cp.norm(cp.hstack([p, q])) <= pv.inverter_rating]
            cost += pv.marginal_cost * p
            inj_p[(pv.node, t)] += p
            inj_q[(pv.node, t)] += q
    for h in fleet.h2:
        m_prev = h.initial_mass
        for t in hours:
            y = mode[(h.name, t)]
            pe, pf, q, m = cp.Variable(), cp.Variable(), cp.Variable(), cp.Variable()
            he, hf = h.kg_per_mwh * pe, pf / h.mwh_per_kg
            cons += [pe >= 0, pe <= h.el_p_max, pf >= 0, pf <= h.fc_p_max,
                     he <= h.el_kg_max * y, hf <= h.fc_kg_max * (1 - y),
                     m >= h.tank_min, m <= h.tank_max,
                     m * (1 + h.dissipation) == m_prev + he - tl.fcev_demand[h.name][idx[t]] - hf,
                     cp.norm(cp.hstack([pe - pf, q])) <= h.inverter_rating]
            inj_p[(h.node, t)] += pf - pe
            inj_q[(h.node, t)] += q
            m_prev = m
    loads = {ld.node: ld for ld in tl.dn_load}
    for t in hours:
        buy, sell, price = market[t]
        qx = cp.Variable()
        cons += [cp.abs(qx) <= net.exchange_limit / mb]
        if not tl.tie_live(t):
            cons.append(qx == 0)
        cost += price * buy - tl.sell_price(t) * sell
        cons.append(v[(net.root_node, t)] == 1.0)
        for n in net.nodes:
            cons += [v[(n, t)] >= net.v_min ** 2, v[(n, t)] <= net.v_max ** 2]
            pl = loads[n].p[idx[t]] if n in loads else 0.0
            ql = loads[n].q[idx[t]] if n in loads else 0.0
            inflow_p = (buy - sell) / mb if n == net.root_node else 0
            inflow_q = qx if n == net.root_node else 0
            for ln in net.lines:
                if ln.to_node == n:
                    inflow_p = inflow_p + fp[(n, t)] - ln.resistance * a[(n, t)]
                    inflow_q = inflow_q + fq[(n, t)] - ln.reactance * a[(n, t)]
                if ln.from_node == n:
                    inflow_p = inflow_p - fp[(ln.to_node, t)]
                    inflow_q = inflow_q - fq[(ln.to_node, t)]
            cons += [inflow_p + inj_p[(n, t)] / mb == pl / mb, inflow_q + inj_q[(n, t)] / mb == ql / mb]
        for ln in net.lines:
            i, j = ln.from_node, ln.to_node
            R, X = ln.resistance, ln.reactance
            cons += [v[(j, t)] == v[(i, t)] - 2 * (R * fp[(j, t)] + X * fq[(j, t)]) + (R * R + X * X) * a[(j, t)],
                     cp.quad_over_lin(cp.hstack([fp[(j, t)], fq[(j, t)]]), v[(i, t)]) <= a[(j, t)],
                     cp.norm(cp.hstack([fp[(j, t)], fq[(j, t)]])) <= ln.mva_limit,
                     cp.norm(cp.hstack([fp[(j, t)] - R * a[(j, t)], fq[(j, t)] - X * a[(j, t)]])) <= ln.mva_limit]
    prob = cp.Problem(cp.Minimize(cost), cons)
    prob.solve(solver=cp.CLARABEL)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        return math.inf
    return float(prob.value)


def enumerate_optimum(sc: Scenario) -> tuple[float, dict]:
    """Best cost over all binary assignments; the scenario must have no outage."""
    hours = list(sc.timeline.hours)
    dg_keys = [(d.name, t) for d in sc.fleet.dgs for t in hours]
    h2_keys = [(h.name, t) for h in sc.fleet.h2 for t in hours]
    best, arg = math.inf, {}
    markets = {(t, u): clear_market(sc, t, u) for t in hours for u in (0, 1)}
    for bits in itertools.product((0, 1), repeat=len(dg_keys) + len(h2_keys) + len(hours)):
        status = dict(zip(dg_keys, bits))
        mode = dict(zip(h2_keys, bits[len(dg_keys):]))
        us = bits[len(dg_keys) + len(h2_keys):]
        market = {t: markets[(t, u)] for t, u in zip(hours, us)}
        val = dso_cost(sc, status, mode, market)
        if val < best:
            best, arg = val, {"status": status, "mode": mode, "u": dict(zip(hours, us))}
    return best, arg
