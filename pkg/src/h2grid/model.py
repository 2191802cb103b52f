"""Assembles one window of the single-level dispatch problem and turns solver
output into a :class:`DispatchSolution`."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from . import dn_builder as dn
from . import tn_builder as tnb
from .core_model import DispatchSolution, Scenario, ScenarioTimeline
from .misocp import ProblemIR, SolveOptions, SolveResult, solve


@dataclass(frozen=True)
class ModelOptions:
    include_cbdr: bool = True
    big_m: float | None = None  # None: use the validity bound
    psi_max: float | None = None  # bound on exchange duals, None: big_m / cap


@dataclass
class WindowModel:
    scenario: Scenario
    timeline: ScenarioTimeline
    ir: ProblemIR
    primal: tnb.LlPrimalBlock
    dual: tnb.LlDualBlock
    lin: tnb.Linearization
    init: dict[str, float] = field(default_factory=dict)


def build_window_model(scenario: Scenario, timeline: ScenarioTimeline | None = None,
                       init: Mapping[str, float] | None = None,
                       options: ModelOptions | None = None) -> WindowModel:
    opts = options or ModelOptions()
    tl = timeline or scenario.timeline
    net, tn, fleet = scenario.network, scenario.tn, scenario.fleet
    base_init = dn.initial_conditions(fleet)
    base_init.update(init or {})

    m_min = tnb.big_m(net, tn, tl)
    M = opts.big_m if opts.big_m is not None else m_min
    psi_max = opts.psi_max if opts.psi_max is not None else M / max(net.exchange_limit, 1e-12)

    blocks = [dn.build_dg_block(d, tl, base_init) for d in fleet.dgs]
    blocks += [dn.build_pv_block(p, tl) for p in fleet.pvs]
    blocks += [dn.build_h2_block(h, tl, base_init) for h in fleet.h2]
    blocks += [dn.build_battery_block(b, tl, base_init) for b in fleet.batteries]
    blocks.append(dn.build_cbdr_block(fleet, tl, include_signals=opts.include_cbdr))
    blocks.append(dn.build_powerflow_block(net, fleet, tl))

    caps = tnb.exchange_caps(net, tl)
    primal = tnb.build_ll_primal(tn, tl, caps)
    dual = tnb.build_ll_dual(tn, tl, primal, psi_max)
    lin = tnb.linearize_exchange_revenue(primal, tl, M, m_min)
    objective = dn.build_objective(fleet, tl, lin.exchange_terms, net)
    ir = tnb.assemble_single_level(blocks, primal, dual, lin, objective)
    return WindowModel(scenario, tl, ir, primal, dual, lin, base_init)


def to_solution(wm: WindowModel, res: SolveResult) -> DispatchSolution:
    return DispatchSolution(hours=tuple(wm.timeline.hours), values=dict(res.x), duals=dict(res.row_duals),
                            cone_duals={k: tuple(float(z) for z in v) for k, v in res.cone_duals.items()},
                            objective=res.objective, mip_gap=res.gap, status=res.status)


def solve_window(wm: WindowModel, opts: SolveOptions | None = None) -> tuple[SolveResult, DispatchSolution]:
    """Branch-and-bound; duals in the result belong to the incumbent's fixed binaries."""
    res = solve(wm.ir, opts or SolveOptions())
    if not res.ok:
        return res, DispatchSolution(hours=tuple(wm.timeline.hours), values={}, status=res.status)
    return res, to_solution(wm, res)


def hourly_objective(ir: ProblemIR, x: Mapping[str, float]) -> dict[int, float]:
    """Objective split by the hour suffix of each variable name."""
    out: dict[int, float] = {}
    for v, c in ir.objective:
        t = int(v[v.rfind("@") + 1:])
        out[t] = out.get(t, 0.0) + c * x[v]
    return out
