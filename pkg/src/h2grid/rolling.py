"""Rolling-horizon driver: 48 h lookahead windows, 24 h commitment, state carried
between windows, and events visible only once they fall inside a window.

The pre-event storage reserve ramps up over the ``reserve_lead`` hours before a
visible event: the required aggregate fraction follows the fastest fill the
storage fleet can physically achieve (so the requirement is always attainable),
capped at 1 and dropped from the event hour onward.
"""
from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from typing import IO, Mapping

from .core_model import DispatchSolution, Fleet, OutageEvent, Scenario, ScenarioTimeline
from .misocp import ModelError, SolveOptions, elastic_report
from .model import ModelOptions, build_window_model, hourly_objective, solve_window


class WindowInfeasible(RuntimeError):
    def __init__(self, window: int, start: int, end: int, status: str, report: list[tuple[str, float]]):
        self.window, self.start, self.end, self.status, self.report = window, start, end, status, report
        rows = ", ".join(f"{n} ({v:.3g})" for n, v in report[:10])
        super().__init__(f"window {window} [{start},{end}] {status}; rows needing relaxation: {rows or 'none found'}")

    def record(self) -> dict:
        return {"error": "infeasible_window", "window": self.window, "start": self.start, "end": self.end,
                "status": self.status, "violated_rows": [[n, v] for n, v in self.report]}


@dataclass(frozen=True)
class RollingOptions:
    window: int = 48
    commit: int = 24
    mode: str = "rolling"  # rolling | perfect
    reserve_lead: int = 42
    solve: SolveOptions = field(default_factory=SolveOptions)
    model: ModelOptions = field(default_factory=ModelOptions)


@dataclass
class RollingState:
    """Initial conditions for the next window plus the committed prefix."""

    hour_cursor: int
    carried: dict[str, float]
    values: dict[str, float] = field(default_factory=dict)
    duals: dict[str, float] = field(default_factory=dict)
    cone_duals: dict[str, tuple[float, ...]] = field(default_factory=dict)
    hourly_cost: dict[int, float] = field(default_factory=dict)


@dataclass
class WindowRecord:
    window: int
    start: int
    end: int
    commit_end: int
    status: str
    objective: float
    gap: float
    nodes: int
    wall_time: float
    initial: dict[str, float]
    final: dict[str, float]
    outage_hours: list[int]
    reserve_hours: list[int]
    counts: dict[str, int]

    def log_record(self) -> dict:
        return {"window": self.window, "start": self.start, "end": self.end, "commit_end": self.commit_end,
                "status": self.status, "objective": self.objective, "gap": self.gap, "nodes": self.nodes,
                "wall_time": round(self.wall_time, 3), "outage_hours": self.outage_hours,
                "reserve_hours": self.reserve_hours}


@dataclass
class RollingResult:
    solution: DispatchSolution
    windows: list[WindowRecord]
    hourly_cost: dict[int, float]


# --------------------------------------------------------------------------- forecast


def _clip_event(e: OutageEvent, start: int, end: int) -> OutageEvent | None:
    lo, hi = max(e.start_hour, start), min(e.end_hour, end)
    if lo > hi:
        return None
    return dataclasses.replace(e, start_hour=lo, end_hour=hi)


def _slice(series, tl: ScenarioTimeline, start: int, n: int) -> tuple[float, ...]:
    i = start - tl.start_hour
    return tuple(series[i:i + n])


def reserve_fraction(fleet: Fleet, tl: ScenarioTimeline, events: list[OutageEvent], start: int, n: int,
                     lead: int, carried: Mapping[str, float] | None = None) -> list[float]:
    """Required aggregate storage fraction per window hour.

    Active on ``[max(start, t_event - lead), t_event)`` for each visible event. The
    fraction grows from the baseline (carried state when activation coincides with
    the window start, otherwise the storage minimum) at the fleet's maximum net
    fill rate. With H2 and batteries both present the smaller fraction is used.
    """
    carried = carried or {}
    kappa = [0.0] * n
    for e in events:
        t_a = max(start, e.start_hour - lead)
        if t_a >= e.start_hour:
            continue
        fracs: list[list[float]] = []
        if fleet.h2:
            cap = sum(h.tank_max for h in fleet.h2)
            if t_a == start:
                m = sum(carried.get(f"h2[{h.name}].mass", h.initial_mass) for h in fleet.h2)
            else:
                m = sum(h.tank_min for h in fleet.h2)
            row = []
            for t in range(t_a, e.start_hour):
                fill = 0.0
                for h in fleet.h2:
                    d = tl.fcev_demand[h.name][t - tl.start_hour] if t - tl.start_hour < tl.horizon_hours else 0.0
                    fill += h.el_kg_max - d
                # dissipation applied as in the implicit mass balance
                diss = max(h.dissipation for h in fleet.h2)
                m = min(cap, (m + max(fill, 0.0)) / (1 + diss))
                row.append(m / cap)
            fracs.append(row)
        if fleet.batteries:
            cap = sum(b.capacity for b in fleet.batteries)
            if cap > 0:
                if t_a == start:
                    s = sum(carried.get(f"bat[{b.name}].soc", b.initial_soc) for b in fleet.batteries)
                else:
                    s = 0.0
                row = []
                for _ in range(t_a, e.start_hour):
                    s = min(cap, s + sum(b.p_rating * b.one_way_eff for b in fleet.batteries))
                    row.append(s / cap)
                fracs.append(row)
        if not fracs:
            continue
        for k, t in enumerate(range(t_a, e.start_hour)):
            if start <= t < start + n:
                # shave a hair so the ramp is never tighter than its own arithmetic
                kappa[t - start] = max(kappa[t - start], max(0.0, min(r[k] for r in fracs) - 1e-9))
    return kappa


def reveal_forecast(sc: Scenario, start: int, end: int, lead: int = 42,
                    carried: Mapping[str, float] | None = None) -> ScenarioTimeline:
    """Timeline for hours ``[start, end]``: profiles sliced, events clipped to the
    window (events outside it are absent), reserve requirement from visible events.

    The bundle's own ``kappa`` series is kept where it is larger.
    """
    tl = sc.timeline
    if start < tl.start_hour or end > tl.start_hour + tl.horizon_hours - 1 or end < start:
        raise ModelError(f"window [{start},{end}] outside the horizon")
    n = end - start + 1
    events = [c for e in tl.outage_events if (c := _clip_event(e, start, end)) is not None]
    visible = [e for e in tl.outage_events if start <= e.start_hour <= end]
    kappa = reserve_fraction(sc.fleet, tl, visible, start, n, lead, carried)
    base = _slice(tl.kappa, tl, start, n)
    return dataclasses.replace(
        tl, horizon_hours=n, start_hour=start,
        dn_load=tuple(dataclasses.replace(ld, p=_slice(ld.p, tl, start, n), q=_slice(ld.q, tl, start, n))
                      for ld in tl.dn_load),
        fcev_demand={k: _slice(v, tl, start, n) for k, v in tl.fcev_demand.items()},
        cbdr=_slice(tl.cbdr, tl, start, n),
        kappa=tuple(max(a, b) for a, b in zip(base, kappa)),
        dso_bid_price=_slice(tl.dso_bid_price, tl, start, n),
        dso_offer_price=_slice(tl.dso_offer_price, tl, start, n),
        dn_sell_price=_slice(tl.dn_sell_price, tl, start, n) if tl.dn_sell_price else (),
        outage_events=tuple(events))


def window_scenario(sc: Scenario, start: int, end: int, lead: int = 42,
                    carried: Mapping[str, float] | None = None) -> Scenario:
    """Scenario whose every profile (feeder, transmission, PV) starts at ``start``."""
    tl = sc.timeline
    n = end - start + 1
    wtl = reveal_forecast(sc, start, end, lead, carried)
    tn = dataclasses.replace(
        sc.tn,
        wind_farms=tuple(dataclasses.replace(w, availability=_slice(w.availability, tl, start, n))
                         for w in sc.tn.wind_farms),
        loads=tuple(dataclasses.replace(ld, profile=_slice(ld.profile, tl, start, n)) for ld in sc.tn.loads))
    fleet = dataclasses.replace(
        sc.fleet, pvs=tuple(dataclasses.replace(p, p_max_profile=_slice(p.p_max_profile, tl, start, n))
                            for p in sc.fleet.pvs))
    return sc.replace(tn=tn, fleet=fleet, timeline=wtl)


# --------------------------------------------------------------------------- driver


def carried_state(fleet: Fleet, values: Mapping[str, float], t: int) -> dict[str, float]:
    """Initial conditions for hour ``t + 1`` read from committed values at hour ``t``."""
    out: dict[str, float] = {}
    for d in fleet.dgs:
        out[f"dg[{d.name}].status"] = float(round(values[f"dg[{d.name}].x@{t}"]))
        out[f"dg[{d.name}].p"] = values[f"dg[{d.name}].p@{t}"]
    for h in fleet.h2:
        out[f"h2[{h.name}].mass"] = values[f"h2[{h.name}].mass@{t}"]
    for b in fleet.batteries:
        out[f"bat[{b.name}].soc"] = values[f"bat[{b.name}].soc@{t}"]
    return out


def _hour_of(name: str) -> int | None:
    at = name.rfind("@")
    return int(name[at + 1:]) if at >= 0 else None


def windows_for(tl: ScenarioTimeline, opts: RollingOptions) -> list[tuple[int, int, int]]:
    """(start, end, commit_end) per window; the last window shrinks and commits the rest."""
    first, last = tl.start_hour, tl.start_hour + tl.horizon_hours - 1
    if opts.mode == "perfect":
        return [(first, last, last)]
    if opts.commit <= 0 or opts.window < opts.commit:
        raise ModelError("need 0 < commit <= window")
    out = []
    s = first
    while s <= last:
        e = min(s + opts.window - 1, last)
        c = min(s + opts.commit - 1, last)
        if e == last:
            c = last
        out.append((s, e, c))
        if c == last:
            break
        s = c + 1
    return out


def run_rolling(sc: Scenario, opts: RollingOptions | None = None, log: IO[str] | None = None,
                initial: Mapping[str, float] | None = None) -> RollingResult:
    opts = opts or RollingOptions()
    if opts.mode not in ("rolling", "perfect"):
        raise ModelError(f"unknown mode {opts.mode!r}")
    from .dn_builder import initial_conditions

    state = RollingState(sc.timeline.start_hour, {**initial_conditions(sc.fleet), **(initial or {})})
    records: list[WindowRecord] = []
    for k, (s, e, c) in enumerate(windows_for(sc.timeline, opts)):
        t0 = time.perf_counter()
        wsc = window_scenario(sc, s, e, opts.reserve_lead, state.carried)
        wm = build_window_model(wsc, init=state.carried, options=opts.model)
        res, sol = solve_window(wm, opts.solve)
        if not res.ok:
            raise WindowInfeasible(k, s, e, res.status, elastic_report(wm.ir) if res.status == "infeasible" else [])
        costs = hourly_objective(wm.ir, res.x)
        for name, v in res.x.items():
            h = _hour_of(name)
            if h is not None and h <= c:
                state.values[name] = v
        for name, v in res.row_duals.items():
            h = _hour_of(name)
            if h is not None and h <= c:
                state.duals[name] = v
        for name, v in sol.cone_duals.items():
            h = _hour_of(name)
            if h is not None and h <= c:
                state.cone_duals[name] = v
        for h, v in costs.items():
            if h <= c:
                state.hourly_cost[h] = v
        initial_k = dict(state.carried)
        state.carried = carried_state(sc.fleet, res.x, c)
        state.hour_cursor = c + 1
        wtl = wm.timeline
        rec = WindowRecord(
            window=k, start=s, end=e, commit_end=c, status=res.status, objective=res.objective, gap=res.gap,
            nodes=res.nodes, wall_time=time.perf_counter() - t0, initial=initial_k, final=dict(state.carried),
            outage_hours=[t for t in wtl.hours if wtl.emergency(t)],
            reserve_hours=[t for t in wtl.hours if wtl.at(wtl.kappa, t) > 0], counts=wm.ir.counts())
        records.append(rec)
        if log is not None:
            log.write(json.dumps(rec.log_record(), sort_keys=True) + "\n")
            log.flush()
    hours = tuple(sc.timeline.hours)
    total = math.fsum(state.hourly_cost[h] for h in hours)
    gap = max((r.gap for r in records), default=0.0)
    status = "optimal" if all(r.status == "optimal" for r in records) else "gap_limit"
    sol = DispatchSolution(hours=hours, values=dict(state.values), duals=dict(state.duals),
                           cone_duals=dict(state.cone_duals), objective=total,
                           mip_gap=gap, status=status)
    return RollingResult(sol, records, dict(state.hourly_cost))
