"""Distribution-side (upper-level) blocks: DGs, PV, H2 systems, batteries, CBDR
signals and the branch-flow SOCP network model, plus the DSO objective.

Initial conditions come in as a flat mapping (see :func:`initial_conditions`):
``dg[NAME].status``, ``dg[NAME].p``, ``h2[NAME].mass``, ``bat[NAME].soc``.
"""
from __future__ import annotations

from typing import Mapping

from .core_model import (BatteryUnit, DgUnit, DistNetwork, Fleet, H2System, PvUnit,
                         ScenarioTimeline, vname)
from .misocp import Block, ModelError, aff


class InfeasibleSignal(ModelError):
    pass


def initial_conditions(fleet: Fleet) -> dict[str, float]:
    init: dict[str, float] = {}
    for d in fleet.dgs:
        init[f"dg[{d.name}].status"] = float(d.initial_status)
        init[f"dg[{d.name}].p"] = float(d.initial_p if d.initial_status else 0.0)
    for h in fleet.h2:
        init[f"h2[{h.name}].mass"] = float(h.initial_mass)
    for b in fleet.batteries:
        init[f"bat[{b.name}].soc"] = float(b.initial_soc)
    return init


def _prev(prefix: str, t: int, tl: ScenarioTimeline) -> str | None:
    return None if t == tl.start_hour else vname(prefix, t - 1)


# --------------------------------------------------------------------------- DG


def build_dg_block(dg: DgUnit, tl: ScenarioTimeline, init: Mapping[str, float] | None = None) -> Block:
    init = init or {}
    x0 = init.get(f"dg[{dg.name}].status", float(dg.initial_status))
    p0 = init.get(f"dg[{dg.name}].p", dg.initial_p if dg.initial_status else 0.0)
    b = Block(f"dg[{dg.name}]")
    pre = f"dg[{dg.name}]"
    for t in tl.hours:
        x = b.var(vname(pre + ".x", t), 0, 1, "B")
        p = b.var(vname(pre + ".p", t), 0, dg.p_max)
        q = b.var(vname(pre + ".q", t), min(dg.q_min, 0.0), max(dg.q_max, 0.0))
        c = b.var(vname(pre + ".c", t))
        su = b.var(vname(pre + ".su", t), 0)
        sd = b.var(vname(pre + ".sd", t), 0)
        failed = tl.failed(dg.name, t)
        if failed:
            b.fix(x, 0.0)
        b.row(vname(pre + ".cost", t), {c: 1, x: -dg.fixed_cost, p: -dg.marginal_cost}, "==", 0, "dg_cost")
        b.row(vname(pre + ".pmin", t), {p: 1, x: -dg.p_min}, ">=", 0, "dg_limit")
        b.row(vname(pre + ".pmax", t), {p: 1, x: -dg.p_max}, "<=", 0, "dg_limit")
        b.row(vname(pre + ".qmin", t), {q: 1, x: -dg.q_min}, ">=", 0, "dg_limit")
        b.row(vname(pre + ".qmax", t), {q: 1, x: -dg.q_max}, "<=", 0, "dg_limit")
        b.soc(vname(pre + ".cap", t), aff(const=dg.s_rating), [aff({p: 1}), aff({q: 1})], "dg_capability")
        xp = _prev(pre + ".x", t, tl)
        pp = _prev(pre + ".p", t, tl)
        if xp is None:
            b.row(vname(pre + ".su", t), {su: 1, x: -dg.startup_cost}, ">=", -dg.startup_cost * x0, "dg_startup")
            b.row(vname(pre + ".sd", t), {sd: 1, x: dg.shutdown_cost}, ">=", dg.shutdown_cost * x0, "dg_shutdown")
        else:
            b.row(vname(pre + ".su", t), {su: 1, x: -dg.startup_cost, xp: dg.startup_cost}, ">=", 0, "dg_startup")
            b.row(vname(pre + ".sd", t), {sd: 1, x: dg.shutdown_cost, xp: -dg.shutdown_cost}, ">=", 0, "dg_shutdown")
        # forced outages are not ramping events
        if failed or tl.failed(dg.name, t - 1):
            continue
        if pp is None:
            b.row(vname(pre + ".ru", t), {p: 1}, "<=", p0 + dg.ramp_up, "dg_ramp")
            b.row(vname(pre + ".rd", t), {p: 1}, ">=", p0 - dg.ramp_down, "dg_ramp")
        else:
            b.row(vname(pre + ".ru", t), {p: 1, pp: -1}, "<=", dg.ramp_up, "dg_ramp")
            b.row(vname(pre + ".rd", t), {p: 1, pp: -1}, ">=", -dg.ramp_down, "dg_ramp")
    return b


# --------------------------------------------------------------------------- PV


def build_pv_block(pv: PvUnit, tl: ScenarioTimeline) -> Block:
    b = Block(f"pv[{pv.name}]")
    pre = f"pv[{pv.name}]"
    if len(pv.p_max_profile) < tl.horizon_hours:
        raise ModelError(f"pv {pv.name}: profile does not cover the window")
    for t in tl.hours:
        pmax = tl.at(pv.p_max_profile, t)
        p = b.var(vname(pre + ".p", t), 0, pmax)
        q = b.var(vname(pre + ".q", t), -pv.inverter_rating, pv.inverter_rating)
        if tl.failed(pv.name, t):
            b.fix(p, 0.0)
            b.fix(q, 0.0)
        b.soc(vname(pre + ".inv", t), aff(const=pv.inverter_rating), [aff({p: 1}), aff({q: 1})], "pv_inverter")
    return b


# --------------------------------------------------------------------------- H2


def build_h2_block(h: H2System, tl: ScenarioTimeline, init: Mapping[str, float] | None = None) -> Block:
    """Electrolyzer/tank/fuel-cell constraints.

    The mass balance is kept in its implicit form
    ``mass_t (1 + dissipation) = mass_{t-1} + qh_el - demand + shed_kg - qh_fc``,
    where ``shed_kg`` is curtailed FCEV demand (only available in emergency hours).
    """
    init = init or {}
    m0 = init.get(f"h2[{h.name}].mass", h.initial_mass)
    dem = tl.fcev_demand.get(h.name)
    if dem is None:
        raise ModelError(f"h2 {h.name}: no fcev demand series")
    b = Block(f"h2[{h.name}]")
    pre = f"h2[{h.name}]"
    k_el = h.kg_per_mwh
    for t in tl.hours:
        d_t = tl.at(dem, t)
        mode = b.var(vname(pre + ".mode", t), 0, 1, "B")
        p_el = b.var(vname(pre + ".p_el", t), 0, h.el_p_max)
        p_fc = b.var(vname(pre + ".p_fc", t), 0, h.fc_p_max)
        qh_el = b.var(vname(pre + ".qh_el", t), 0, h.el_kg_max)
        qh_fc = b.var(vname(pre + ".qh_fc", t), 0, h.fc_kg_max)
        mass = b.var(vname(pre + ".mass", t), h.tank_min, h.tank_max)
        q = b.var(vname(pre + ".q", t), -h.inverter_rating, h.inverter_rating)
        shed = b.var(vname(pre + ".el_shed", t), 0, d_t / k_el if tl.emergency(t) else 0.0)
        if tl.failed(h.name, t):
            for v in (p_el, p_fc, q):
                b.fix(v, 0.0)
        b.row(vname(pre + ".conv_el", t), {qh_el: 1, p_el: -k_el}, "==", 0, "h2_conversion")
        b.row(vname(pre + ".conv_fc", t), {p_fc: 1, qh_fc: -h.mwh_per_kg}, "==", 0, "h2_conversion")
        b.row(vname(pre + ".el_max", t), {qh_el: 1, mode: -h.el_kg_max}, "<=", 0, "h2_mode")
        b.row(vname(pre + ".el_min", t), {qh_el: 1, mode: -h.el_kg_min}, ">=", 0, "h2_mode")
        b.row(vname(pre + ".fc_max", t), {qh_fc: 1, mode: h.fc_kg_max}, "<=", h.fc_kg_max, "h2_mode")
        b.row(vname(pre + ".fc_min", t), {qh_fc: 1, mode: h.fc_kg_min}, ">=", h.fc_kg_min, "h2_mode")
        terms = {mass: 1 + h.dissipation, qh_el: -1, qh_fc: 1, shed: -k_el}
        prev = _prev(pre + ".mass", t, tl)
        rhs = -d_t
        if prev is None:
            rhs += m0
        else:
            terms[prev] = -1
        b.row(vname(pre + ".balance", t), terms, "==", rhs, "h2_mass")
        b.soc(vname(pre + ".inv", t), aff(const=h.inverter_rating), [aff({p_el: 1, p_fc: -1}), aff({q: 1})],
              "h2_inverter")
    return b


# --------------------------------------------------------------------------- battery


def build_battery_block(bat: BatteryUnit, tl: ScenarioTimeline, init: Mapping[str, float] | None = None) -> Block:
    """Battery with exclusive charge/discharge; efficiency split evenly per direction."""
    init = init or {}
    s0 = init.get(f"bat[{bat.name}].soc", bat.initial_soc)
    eta = bat.one_way_eff
    b = Block(f"bat[{bat.name}]")
    pre = f"bat[{bat.name}]"
    for t in tl.hours:
        m = b.var(vname(pre + ".mode", t), 0, 1, "B")
        ch = b.var(vname(pre + ".ch", t), 0, bat.p_rating)
        dis = b.var(vname(pre + ".dis", t), 0, bat.p_rating)
        soc = b.var(vname(pre + ".soc", t), 0, bat.capacity)
        if tl.failed(bat.name, t):
            b.fix(ch, 0.0)
            b.fix(dis, 0.0)
        b.row(vname(pre + ".ch_max", t), {ch: 1, m: -bat.p_rating}, "<=", 0, "bat_mode")
        b.row(vname(pre + ".dis_max", t), {dis: 1, m: bat.p_rating}, "<=", bat.p_rating, "bat_mode")
        terms = {soc: 1, ch: -eta, dis: 1 / eta}
        prev = _prev(pre + ".soc", t, tl)
        rhs = 0.0
        if prev is None:
            rhs = s0
        else:
            terms[prev] = -1
        b.row(vname(pre + ".balance", t), terms, "==", rhs, "bat_soc")
    return b


# --------------------------------------------------------------------------- CBDR / reserve


def build_cbdr_block(fleet: Fleet, tl: ScenarioTimeline, include_signals: bool = True) -> Block:
    """Fleet-aggregate demand-response rows and the pre-event storage reserve.

    Signal rows are emitted only for hours with a nonzero signal; reserve rows only
    for hours with ``kappa > 0``. Batteries get the same reserve on their energy.
    """
    b = Block("cbdr")
    el_cap = sum(h.el_p_max for h in fleet.h2)
    fc_cap = sum(h.fc_p_max for h in fleet.h2)
    for t in tl.hours:
        if include_signals and fleet.h2:
            sig = tl.at(tl.cbdr, t)
            if sig > 0:
                if sig > el_cap + 1e-9:
                    raise InfeasibleSignal(f"infeasible DR signal at hour {t}: {sig} MW > electrolyzer fleet {el_cap} MW")
                terms = {vname(f"h2[{h.name}].p_el", t): 1 for h in fleet.h2}
                b.row(vname("cbdr.el_lo", t), terms, ">=", sig, "cbdr")
                b.row(vname("cbdr.el_hi", t), terms, "<=", el_cap, "cbdr")
            elif sig < 0:
                if -sig > fc_cap + 1e-9:
                    raise InfeasibleSignal(f"infeasible DR signal at hour {t}: {-sig} MW > fuel-cell fleet {fc_cap} MW")
                terms = {vname(f"h2[{h.name}].p_fc", t): 1 for h in fleet.h2}
                b.row(vname("cbdr.fc_lo", t), terms, ">=", -sig, "cbdr")
                b.row(vname("cbdr.fc_hi", t), terms, "<=", fc_cap, "cbdr")
        kap = tl.at(tl.kappa, t)
        if kap > 0:
            if fleet.h2:
                terms = {vname(f"h2[{h.name}].mass", t): 1 for h in fleet.h2}
                b.row(vname("reserve.h2", t), terms, ">=", kap * sum(h.tank_max for h in fleet.h2), "kappa")
            if fleet.batteries:
                terms = {vname(f"bat[{x.name}].soc", t): 1 for x in fleet.batteries}
                b.row(vname("reserve.bat", t), terms, ">=", kap * sum(x.capacity for x in fleet.batteries), "kappa")
    return b


# --------------------------------------------------------------------------- network


def build_powerflow_block(network: DistNetwork, fleet: Fleet, tl: ScenarioTimeline) -> Block:
    """Branch-flow model with the conic relaxation, line limits and load shedding.

    Variables: ``ln[j].fp/fq/a`` for the line feeding node ``j`` (sending-end flow,
    squared current), ``nd[i].v`` squared voltage, ``nd[i].shed_p/shed_q`` (MW) and
    ``ex.q`` reactive support at the root. Exchange ``ex.buy/ex.sell`` (MW) are
    declared by the transmission block.
    """
    for e in tl.outage_events:
        if any(a.startswith("line") for a in e.failed_assets):
            raise ModelError("disconnected node after outage application: line outages are not supported")
    mb = network.base_mva
    b = Block("dn")
    into = network.parent_line()
    kids = network.children()
    loads = {ld.node: ld for ld in tl.dn_load}
    injections: dict[int, list[tuple[str, float]]] = {n: [] for n in network.nodes}
    reactive: dict[int, list[str]] = {n: [] for n in network.nodes}
    for d in fleet.dgs:
        injections[d.node].append((f"dg[{d.name}].p", 1.0))
        reactive[d.node].append(f"dg[{d.name}].q")
    for p in fleet.pvs:
        injections[p.node].append((f"pv[{p.name}].p", 1.0))
        reactive[p.node].append(f"pv[{p.name}].q")
    for h in fleet.h2:
        injections[h.node].append((f"h2[{h.name}].p_fc", 1.0))
        injections[h.node].append((f"h2[{h.name}].p_el", -1.0))
        reactive[h.node].append(f"h2[{h.name}].q")
    for x in fleet.batteries:
        injections[x.node].append((f"bat[{x.name}].dis", 1.0))
        injections[x.node].append((f"bat[{x.name}].ch", -1.0))

    vmin2, vmax2 = network.v_min ** 2, network.v_max ** 2
    for t in tl.hours:
        emergency = tl.emergency(t)
        for n in network.nodes:
            v = b.var(vname(f"nd[{n}].v", t), vmin2, vmax2)
            if n == network.root_node:
                b.fix(v, 1.0)
            ld = loads.get(n)
            pl = tl.at(ld.p, t) if ld else 0.0
            ql = tl.at(ld.q, t) if ld else 0.0
            sp_ = b.var(vname(f"nd[{n}].shed_p", t), 0, pl if emergency else 0.0)
            sq_ = b.var(vname(f"nd[{n}].shed_q", t), min(0.0, ql), max(0.0, ql))
            if pl > 0:
                b.row(vname(f"nd[{n}].shed_ratio", t), {sq_: 1, sp_: -ql / pl}, "==", 0, "shed_reactive")
            else:
                b.fix(sq_, 0.0)
        for k, ln in enumerate(network.lines):
            j = ln.to_node
            amax = ln.mva_limit ** 2 / vmin2
            b.var(vname(f"ln[{j}].fp", t))
            b.var(vname(f"ln[{j}].fq", t))
            b.var(vname(f"ln[{j}].a", t), 0, amax)
        tie = tl.tie_live(t)
        qx = b.var(vname("ex.q", t), -network.exchange_limit / mb, network.exchange_limit / mb)
        if not tie:
            b.fix(qx, 0.0)

        for n in network.nodes:
            ld = loads.get(n)
            pl = tl.at(ld.p, t) if ld else 0.0
            ql = tl.at(ld.q, t) if ld else 0.0
            pt: dict[str, float] = {}
            qt: dict[str, float] = {}
            if n == network.root_node:
                pt[vname("ex.buy", t)] = 1.0 / mb
                pt[vname("ex.sell", t)] = -1.0 / mb
                qt[qx] = 1.0
            else:
                ln = network.lines[into[n]]
                pt[vname(f"ln[{n}].fp", t)] = 1.0
                pt[vname(f"ln[{n}].a", t)] = -ln.resistance
                qt[vname(f"ln[{n}].fq", t)] = 1.0
                qt[vname(f"ln[{n}].a", t)] = -ln.reactance
            for k in kids[n]:
                c = network.lines[k].to_node
                pt[vname(f"ln[{c}].fp", t)] = -1.0
                qt[vname(f"ln[{c}].fq", t)] = -1.0
            for var, sgn in injections[n]:
                name = vname(var, t)
                pt[name] = pt.get(name, 0.0) + sgn / mb
            for var in reactive[n]:
                qt[vname(var, t)] = 1.0 / mb
            pt[vname(f"nd[{n}].shed_p", t)] = 1.0 / mb
            qt[vname(f"nd[{n}].shed_q", t)] = 1.0 / mb
            b.row(vname(f"bal_p[{n}]", t), pt, "==", pl / mb, "balance_p")
            b.row(vname(f"bal_q[{n}]", t), qt, "==", ql / mb, "balance_q")

        for ln in network.lines:
            i, j = ln.from_node, ln.to_node
            fp, fq, a = (vname(f"ln[{j}].{s}", t) for s in ("fp", "fq", "a"))
            vi, vj = vname(f"nd[{i}].v", t), vname(f"nd[{j}].v", t)
            R, X = ln.resistance, ln.reactance
            b.row(vname(f"vdrop[{j}]", t), {vj: 1, vi: -1, fp: 2 * R, fq: 2 * X, a: -(R * R + X * X)}, "==", 0,
                  "vdrop")
            b.rsoc(vname(f"socp[{j}]", t), aff({a: 1}), aff({vi: 1}), [aff({fp: 1}), aff({fq: 1})], "socp")
            S = aff(const=ln.mva_limit)
            b.soc(vname(f"lim_send[{j}]", t), S, [aff({fp: 1}), aff({fq: 1})], "line_limit")
            b.soc(vname(f"lim_recv[{j}]", t), S, [aff({fp: 1, a: -R}), aff({fq: 1, a: -X})], "line_limit")
    return b


# --------------------------------------------------------------------------- objective


def build_objective(fleet: Fleet, tl: ScenarioTimeline, exchange_terms: Mapping[int, Mapping[str, float]],
                    network: DistNetwork | None = None) -> Block:
    """DSO cost: purchase (given as linearized ``exchange_terms`` per hour), minus
    sales at ``dn_sell_price``, DG operating/start/stop cost, PV cost, VOLL-weighted
    shedding and a small FCEV-curtailment penalty. H2 operation itself is not costed.
    """
    for name, s in (("dso_bid_price", tl.dso_bid_price), ("dso_offer_price", tl.dso_offer_price)):
        if len(s) < tl.horizon_hours:
            raise ModelError(f"missing price series {name} for the window")
    if tl.dn_sell_price and len(tl.dn_sell_price) < tl.horizon_hours:
        raise ModelError("missing price series dn_sell_price for the window")
    b = Block("objective")
    loads = {ld.node: ld for ld in tl.dn_load}
    for t in tl.hours:
        for v, c in exchange_terms.get(t, {}).items():
            b.cost(v, c)
        b.cost(vname("ex.sell", t), -tl.sell_price(t))
        for d in fleet.dgs:
            for s in ("c", "su", "sd"):
                b.cost(vname(f"dg[{d.name}].{s}", t), 1.0)
        for p in fleet.pvs:
            b.cost(vname(f"pv[{p.name}].p", t), p.marginal_cost)
        if tl.emergency(t):
            for n, ld in loads.items():
                b.cost(vname(f"nd[{n}].shed_p", t), tl.voll[ld.tier])
            for h in fleet.h2:
                b.cost(vname(f"h2[{h.name}].el_shed", t), tl.fcev_shed_penalty * h.kg_per_mwh)
    return b
