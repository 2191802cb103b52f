"""Transmission (lower-level) market clearing, its LP dual, strong duality and the
single-level reformulation.

Sign conventions of the dual multipliers (minimisation primal):

=====================  ==============================  =========
multiplier             primal row                      sign
=====================  ==============================  =========
``du.alo[g]``          Pg >= Pg_min                    >= 0
``du.ahi[g]``          Pg <= Pg_max                    <= 0
``du.lam[b]``          bus balance                     free
``du.zeta[k]``         flow definition                 free
``du.dlo[k]``          Tfl >= Tfl_min                  >= 0
``du.dhi[k]``          Tfl <= Tfl_max                  <= 0
``du.gam[w]``          Pw <= Pw_max                    <= 0
``du.psis``            P_sell <= cap*U                 >= 0 (negated)
``du.psib``            P_buy <= cap*(1-U)              >= 0 (negated)
=====================  ==============================  =========

With these signs the dual feasibility rows read
``alo + ahi + lam = Cg``, ``gam + lam <= Cw``, ``lam_c + psib >= rho_b`` and
``lam_c - psis <= rho_s``; the purchase cost ``lam_c * P_buy`` equals
``rho_b * P_buy - cap * psib + K`` at any lower-level optimum, with ``K = cap * psib * U``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .core_model import DistNetwork, ScenarioTimeline, TransNetwork, vname
from .misocp import Block, ModelError, ProblemIR


def exchange_caps(network: DistNetwork, tl: ScenarioTimeline) -> dict[int, float]:
    """Exchange limit (MW) per hour; zero while the tie line is out."""
    return {t: (network.exchange_limit if tl.tie_live(t) else 0.0) for t in tl.hours}


class LlPrimalBlock(Block):
    def __init__(self):
        super().__init__("tn")
        self.objective_by_hour: dict[int, dict[str, float]] = {}
        self.caps: dict[int, float] = {}


class LlDualBlock(Block):
    def __init__(self):
        super().__init__("dual")
        self.objective_by_hour: dict[int, dict[str, float]] = {}


def build_ll_primal(tn: TransNetwork, tl: ScenarioTimeline, caps: Mapping[int, float]) -> LlPrimalBlock:
    """DC market clearing with the DSO's buy bid (``dso_bid_price``) and sell offer."""
    for ln in tn.lines:
        if ln.reactance == 0:
            raise ModelError(f"zero reactance on tn line {ln.from_bus}-{ln.to_bus}")
    if tn.dn_coupling_bus not in tn.buses:
        raise ModelError("coupling bus missing from transmission network")
    b = LlPrimalBlock()
    loads = {ld.bus: ld.profile for ld in tn.loads}
    c = tn.dn_coupling_bus
    for t in tl.hours:
        cap = caps[t]
        b.caps[t] = cap
        obj: dict[str, float] = {}
        for g in tn.generators:
            pg = b.var(vname(f"tn.pg[{g.name}]", t))
            b.row(vname(f"ll.pgmin[{g.name}]", t), {pg: 1}, ">=", g.p_min, "ll")
            b.row(vname(f"ll.pgmax[{g.name}]", t), {pg: 1}, "<=", g.p_max, "ll")
            obj[pg] = g.marginal_cost
        for w in tn.wind_farms:
            pw = b.var(vname(f"tn.pw[{w.name}]", t), 0)
            b.row(vname(f"ll.wind[{w.name}]", t), {pw: 1}, "<=", tl.at(w.availability, t), "ll")
            obj[pw] = w.marginal_cost
        for k, ln in enumerate(tn.lines):
            b.var(vname(f"tn.fl[{k}]", t))
        for n in tn.buses:
            th = b.var(vname(f"tn.th[{n}]", t))
            if n == tn.ref_bus:
                b.fix(th, 0.0)
        buy = b.var(vname("ex.buy", t), 0)
        sell = b.var(vname("ex.sell", t), 0)
        u = b.var(vname("ex.u", t), 0, 1, "B")
        if cap == 0:
            b.fix(buy, 0.0)
            b.fix(sell, 0.0)
            b.fix(u, 0.0)
        rb, rs = tl.at(tl.dso_bid_price, t), tl.at(tl.dso_offer_price, t)
        obj[buy] = -rb
        obj[sell] = rs
        for n in tn.buses:
            terms: dict[str, float] = {}
            for g in tn.generators:
                if g.bus == n:
                    terms[vname(f"tn.pg[{g.name}]", t)] = 1.0
            for w in tn.wind_farms:
                if w.bus == n:
                    terms[vname(f"tn.pw[{w.name}]", t)] = 1.0
            for k, ln in enumerate(tn.lines):
                if ln.to_bus == n:
                    terms[vname(f"tn.fl[{k}]", t)] = terms.get(vname(f"tn.fl[{k}]", t), 0.0) + 1.0
                if ln.from_bus == n:
                    terms[vname(f"tn.fl[{k}]", t)] = terms.get(vname(f"tn.fl[{k}]", t), 0.0) - 1.0
            if n == c:
                terms[buy] = -1.0
                terms[sell] = 1.0
            td = tl.at(loads[n], t) if n in loads else 0.0
            b.row(vname(f"ll.bal[{n}]", t), terms, "==", td, "ll_balance")
        for k, ln in enumerate(tn.lines):
            fl = vname(f"tn.fl[{k}]", t)
            b.row(vname(f"ll.flow[{k}]", t),
                  {fl: 1, vname(f"tn.th[{ln.from_bus}]", t): -1 / ln.reactance,
                   vname(f"tn.th[{ln.to_bus}]", t): 1 / ln.reactance}, "==", 0, "ll")
            b.row(vname(f"ll.flmin[{k}]", t), {fl: 1}, ">=", ln.flow_min, "ll")
            b.row(vname(f"ll.flmax[{k}]", t), {fl: 1}, "<=", ln.flow_max, "ll")
        b.row(vname("ll.exs", t), {sell: 1, u: -cap}, "<=", 0, "ll")
        b.row(vname("ll.exb", t), {buy: 1, u: cap}, "<=", cap, "ll")
        b.objective_by_hour[t] = obj
    return b


def build_ll_dual(tn: TransNetwork, tl: ScenarioTimeline, primal: LlPrimalBlock, psi_max: float) -> LlDualBlock:
    """Dual feasibility rows, one per primal column, and the per-hour dual objective.

    The exchange terms of the dual objective contain ``cap*U*psi`` products; they
    reference the auxiliary variables ``lin.k``/``lin.j`` built by
    :func:`linearize_exchange_revenue`.
    """
    b = LlDualBlock()
    loads = {ld.bus: ld.profile for ld in tn.loads}
    c = tn.dn_coupling_bus
    for t in tl.hours:
        if t not in primal.caps:
            raise ModelError(f"primal block does not cover hour {t}")
        cap = primal.caps[t]
        obj: dict[str, float] = {}
        lam = {n: b.var(vname(f"du.lam[{n}]", t)) for n in tn.buses}
        for n in tn.buses:
            obj[lam[n]] = tl.at(loads[n], t) if n in loads else 0.0
        for g in tn.generators:
            alo = b.var(vname(f"du.alo[{g.name}]", t), 0)
            ahi = b.var(vname(f"du.ahi[{g.name}]", t), ub=0)
            b.row(vname(f"dual.pg[{g.name}]", t), {alo: 1, ahi: 1, lam[g.bus]: 1}, "==", g.marginal_cost, "ll_dual")
            obj[alo] = g.p_min
            obj[ahi] = g.p_max
        for w in tn.wind_farms:
            gam = b.var(vname(f"du.gam[{w.name}]", t), ub=0)
            b.row(vname(f"dual.pw[{w.name}]", t), {gam: 1, lam[w.bus]: 1}, "<=", w.marginal_cost, "ll_dual")
            obj[gam] = tl.at(w.availability, t)
        for k, ln in enumerate(tn.lines):
            z = b.var(vname(f"du.zeta[{k}]", t))
            dlo = b.var(vname(f"du.dlo[{k}]", t), 0)
            dhi = b.var(vname(f"du.dhi[{k}]", t), ub=0)
            terms = {z: 1.0, dlo: 1.0, dhi: 1.0}
            terms[lam[ln.to_bus]] = terms.get(lam[ln.to_bus], 0.0) + 1.0
            terms[lam[ln.from_bus]] = terms.get(lam[ln.from_bus], 0.0) - 1.0
            b.row(vname(f"dual.fl[{k}]", t), terms, "==", 0, "ll_dual")
            obj[dlo] = ln.flow_min
            obj[dhi] = ln.flow_max
        for n in tn.buses:
            if n == tn.ref_bus:
                continue
            terms = {}
            for k, ln in enumerate(tn.lines):
                if ln.from_bus == n:
                    terms[vname(f"du.zeta[{k}]", t)] = terms.get(vname(f"du.zeta[{k}]", t), 0.0) - 1 / ln.reactance
                if ln.to_bus == n:
                    terms[vname(f"du.zeta[{k}]", t)] = terms.get(vname(f"du.zeta[{k}]", t), 0.0) + 1 / ln.reactance
            b.row(vname(f"dual.th[{n}]", t), terms, "==", 0, "ll_dual")
        # with the tie out, exchange is fixed at zero and its columns leave the lower level
        ub = psi_max if cap > 0 else 0.0
        psib = b.var(vname("du.psib", t), 0, ub)
        psis = b.var(vname("du.psis", t), 0, ub)
        rb, rs = tl.at(tl.dso_bid_price, t), tl.at(tl.dso_offer_price, t)
        if cap > 0:
            b.row(vname("dual.buy", t), {lam[c]: 1, psib: 1}, ">=", rb, "ll_dual")
            b.row(vname("dual.sell", t), {lam[c]: 1, psis: -1}, "<=", rs, "ll_dual")
        obj[psib] = -cap
        obj[vname("lin.k", t)] = 1.0
        obj[vname("lin.j", t)] = -1.0
        b.objective_by_hour[t] = obj
    return b


def big_m(network: DistNetwork, tn: TransNetwork, tl: ScenarioTimeline) -> float:
    """Smallest M accepted for the exchange-revenue linearization."""
    costs = [g.marginal_cost for g in tn.generators] + [w.marginal_cost for w in tn.wind_farms]
    top = max(tl.dso_bid_price[i] for i in range(tl.horizon_hours)) + max(costs, default=0.0) + max(tl.voll.values())
    return network.exchange_limit * top


@dataclass
class Linearization:
    block: Block
    exchange_terms: dict[int, dict[str, float]] = field(default_factory=dict)  # purchase cost per hour
    M: float = 0.0


def linearize_exchange_revenue(primal: LlPrimalBlock, tl: ScenarioTimeline, M: float, M_min: float) -> Linearization:
    """Replaces ``lam_c * P_buy`` by ``rho_b*P_buy - cap*psib + K`` with ``K = cap*psib*U``
    (and ``J = cap*psis*U`` for the dual objective), each product written as big-M rows."""
    if M < M_min * (1 - 1e-12):
        raise ModelError(f"big-M {M} is below the validity bound {M_min}")
    b = Block("lin")
    lin = Linearization(b, M=M)
    for t in tl.hours:
        cap = primal.caps[t]
        u = vname("ex.u", t)
        for aux, psi in (("k", "du.psib"), ("j", "du.psis")):
            v = b.var(vname(f"lin.{aux}", t), 0, M if cap > 0 else 0.0)
            p = vname(psi, t)
            b.row(vname(f"lin.{aux}_hi", t), {v: 1, p: -cap, u: M}, "<=", M, "bigm")
            b.row(vname(f"lin.{aux}_lo", t), {v: 1, p: -cap, u: -M}, ">=", -M, "bigm")
            b.row(vname(f"lin.{aux}_on", t), {v: 1, u: -M}, "<=", 0, "bigm")
            b.row(vname(f"lin.{aux}_off", t), {v: 1, u: M}, ">=", 0, "bigm")
        rb = tl.at(tl.dso_bid_price, t)
        lin.exchange_terms[t] = {vname("ex.buy", t): rb, vname("du.psib", t): -cap, vname("lin.k", t): 1.0}
    return lin


def strong_duality_block(primal: LlPrimalBlock, dual: LlDualBlock) -> Block:
    """One equality per hour: lower-level primal cost equals dual objective.

    The lower level is separable in time, so hourly equalities describe the same
    optimal set as the single summed equality and give a tighter relaxation.
    """
    b = Block("sd")
    for t, pobj in primal.objective_by_hour.items():
        terms = dict(pobj)
        for v, c in dual.objective_by_hour[t].items():
            terms[v] = terms.get(v, 0.0) - c
        b.row(vname("sd", t), terms, "==", 0, "strong_duality")
    return b


def assert_strong_duality(primal_obj: float, dual_obj: float, tol: float = 1e-6) -> float:
    """Returns ``|primal - dual|``; the caller compares it against ``tol*(1+|primal|)``."""
    return abs(primal_obj - dual_obj)


def ll_objectives(values: Mapping[str, float], primal: LlPrimalBlock, dual: LlDualBlock) -> tuple[float, float]:
    """Evaluates the lower-level primal and dual objectives at a solved point,
    using the exact bilinear exchange terms (not their linearization)."""
    p = sum(c * values[v] for obj in primal.objective_by_hour.values() for v, c in obj.items())
    d = 0.0
    for t, obj in dual.objective_by_hour.items():
        cap = primal.caps[t]
        u = values[vname("ex.u", t)]
        for v, c in obj.items():
            if v.startswith("lin."):
                continue
            d += c * values[v]
        d += cap * u * values[vname("du.psib", t)] - cap * u * values[vname("du.psis", t)]
    return p, d


def assemble_single_level(ul_blocks: Sequence[Block], primal: LlPrimalBlock, dual: LlDualBlock,
                          lin: Linearization, objective: Block) -> ProblemIR:
    hours_p = set(primal.objective_by_hour)
    if hours_p != set(dual.objective_by_hour) or hours_p != set(lin.exchange_terms):
        raise ModelError("blocks do not share the same window")
    sd = strong_duality_block(primal, dual)
    return ProblemIR.from_blocks([*ul_blocks, primal, dual, lin.block, sd, objective])
