"""Typed domain data for the integrated distribution/transmission dispatch model.

Every type is a frozen dataclass. Profiles are tuples indexed from the owning
timeline's ``start_hour`` (hours are 1-based, one-hour steps). Distribution
quantities are per-unit on ``DistNetwork.base_mva``; transmission quantities in MW.
"""
from __future__ import annotations

import dataclasses
import math
import typing
from dataclasses import dataclass, field
from typing import Any, Mapping

from .misocp import ProblemIR

TIERS = ("critical", "moderately_critical", "non_critical")
DEFAULT_VOLL = {"critical": 10000.0, "moderately_critical": 5000.0, "non_critical": 1000.0}


def vname(prefix: str, t: int) -> str:
    """Canonical time-indexed variable name, e.g. ``dg[DG1].p@73``."""
    return f"{prefix}@{t}"


# --------------------------------------------------------------------------- networks


@dataclass(frozen=True)
class DnLine:
    from_node: int
    to_node: int
    resistance: float
    reactance: float
    mva_limit: float


@dataclass(frozen=True)
class DistNetwork:
    nodes: tuple[int, ...]
    lines: tuple[DnLine, ...]
    root_node: int = 1
    root_tn_bus: int = 2
    v_min: float = 0.95
    v_max: float = 1.05
    exchange_limit: float = 1.0  # MW
    base_mva: float = 1.0

    def parent_line(self) -> dict[int, int]:
        """node -> index of the line feeding it (root excluded)."""
        return {ln.to_node: k for k, ln in enumerate(self.lines)}

    def children(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {n: [] for n in self.nodes}
        for k, ln in enumerate(self.lines):
            out[ln.from_node].append(k)
        return out

    def path_lines(self, node: int) -> list[int]:
        """Line indices from the root down to ``node``."""
        into = self.parent_line()
        path = []
        while node != self.root_node:
            k = into[node]
            path.append(k)
            node = self.lines[k].from_node
        return path[::-1]


@dataclass(frozen=True)
class TnLine:
    from_bus: int
    to_bus: int
    reactance: float
    flow_min: float
    flow_max: float


@dataclass(frozen=True)
class Generator:
    name: str
    bus: int
    p_min: float
    p_max: float
    marginal_cost: float


@dataclass(frozen=True)
class WindFarm:
    name: str
    bus: int
    marginal_cost: float
    availability: tuple[float, ...]


@dataclass(frozen=True)
class BusLoad:
    bus: int
    profile: tuple[float, ...]


@dataclass(frozen=True)
class TransNetwork:
    buses: tuple[int, ...]
    lines: tuple[TnLine, ...]
    generators: tuple[Generator, ...]
    wind_farms: tuple[WindFarm, ...]
    loads: tuple[BusLoad, ...]
    dn_coupling_bus: int = 2
    ref_bus: int = 1


# --------------------------------------------------------------------------- assets


@dataclass(frozen=True)
class DgUnit:
    name: str
    node: int
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    s_rating: float
    fixed_cost: float
    marginal_cost: float
    startup_cost: float
    shutdown_cost: float
    ramp_up: float
    ramp_down: float
    initial_status: int = 0
    initial_p: float = 0.0


@dataclass(frozen=True)
class PvUnit:
    name: str
    node: int
    p_max_profile: tuple[float, ...]
    inverter_rating: float
    marginal_cost: float


@dataclass(frozen=True)
class H2System:
    """Electrolyzer + tank + fuel cell. Masses in kg, powers in MW."""

    name: str
    node: int
    el_p_max: float
    fc_p_max: float
    el_kg_min: float
    el_kg_max: float
    fc_kg_min: float
    fc_kg_max: float
    tank_min: float
    tank_max: float
    el_conv: float  # kg/MWh
    fc_conv: float  # MWh/kg
    el_eff: float
    fc_eff: float
    dissipation: float
    inverter_rating: float
    initial_mass: float

    @classmethod
    def make(cls, name: str, node: int, el_p_max: float = 0.5, fc_p_max: float = 0.5,
             tank_min: float = 10.0, tank_max: float = 400.0, el_conv: float = 20.0,
             fc_conv: float = 1 / 30.0, el_eff: float = 0.7, fc_eff: float = 0.5,
             dissipation: float = 0.0, inverter_rating: float | None = None,
             initial_mass: float | None = None) -> "H2System":
        """Derives the kg/h limits from the power ratings so the conversions stay consistent."""
        return cls(
            name=name, node=node, el_p_max=el_p_max, fc_p_max=fc_p_max,
            el_kg_min=0.0, el_kg_max=el_conv * el_eff * el_p_max,
            fc_kg_min=0.0, fc_kg_max=fc_p_max / (fc_conv * fc_eff),
            tank_min=tank_min, tank_max=tank_max, el_conv=el_conv, fc_conv=fc_conv,
            el_eff=el_eff, fc_eff=fc_eff, dissipation=dissipation,
            inverter_rating=inverter_rating if inverter_rating is not None else max(el_p_max, fc_p_max),
            initial_mass=tank_min if initial_mass is None else initial_mass,
        )

    @property
    def kg_per_mwh(self) -> float:
        return self.el_conv * self.el_eff

    @property
    def mwh_per_kg(self) -> float:
        return self.fc_conv * self.fc_eff


@dataclass(frozen=True)
class BatteryUnit:
    name: str
    node: int
    p_rating: float
    duration: float
    round_trip_eff: float = 0.90
    initial_soc: float = 0.0

    @property
    def capacity(self) -> float:
        return self.p_rating * self.duration

    @property
    def one_way_eff(self) -> float:
        return math.sqrt(self.round_trip_eff)


@dataclass(frozen=True)
class Fleet:
    dgs: tuple[DgUnit, ...] = ()
    pvs: tuple[PvUnit, ...] = ()
    h2: tuple[H2System, ...] = ()
    batteries: tuple[BatteryUnit, ...] = ()

    def asset_names(self) -> set[str]:
        return {a.name for group in (self.dgs, self.pvs, self.h2, self.batteries) for a in group}


# --------------------------------------------------------------------------- timeline


@dataclass(frozen=True)
class NodeLoad:
    node: int
    tier: str
    p: tuple[float, ...]
    q: tuple[float, ...]


@dataclass(frozen=True)
class OutageEvent:
    start_hour: int
    end_hour: int  # inclusive
    disconnected_tie: bool = True
    failed_assets: tuple[str, ...] = ()

    def covers(self, t: int) -> bool:
        return self.start_hour <= t <= self.end_hour


@dataclass(frozen=True)
class ScenarioTimeline:
    horizon_hours: int
    dn_load: tuple[NodeLoad, ...]
    fcev_demand: Mapping[str, tuple[float, ...]]
    cbdr: tuple[float, ...]
    kappa: tuple[float, ...]
    dso_bid_price: tuple[float, ...]
    dso_offer_price: tuple[float, ...]
    dn_sell_price: tuple[float, ...] = ()
    outage_events: tuple[OutageEvent, ...] = ()
    voll: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_VOLL))
    forecast_lead: int = 24
    start_hour: int = 1
    fcev_shed_penalty: float = 1e-3  # $/kg

    @property
    def hours(self) -> range:
        return range(self.start_hour, self.start_hour + self.horizon_hours)

    def at(self, series: tuple[float, ...], t: int) -> float:
        return series[t - self.start_hour]

    def sell_price(self, t: int) -> float:
        return self.at(self.dn_sell_price or self.dso_offer_price, t)

    def emergency(self, t: int) -> bool:
        return any(e.covers(t) for e in self.outage_events)

    def tie_live(self, t: int) -> bool:
        return not any(e.covers(t) and e.disconnected_tie for e in self.outage_events)

    def failed(self, asset: str, t: int) -> bool:
        return any(e.covers(t) and asset in e.failed_assets for e in self.outage_events)


@dataclass(frozen=True)
class Scenario:
    network: DistNetwork
    tn: TransNetwork
    fleet: Fleet
    timeline: ScenarioTimeline
    name: str = "scenario"

    def replace(self, **kw) -> "Scenario":
        return dataclasses.replace(self, **kw)


# --------------------------------------------------------------------------- solutions


@dataclass(frozen=True)
class DispatchSolution:
    """Solved values keyed by variable name (see :func:`vname`) plus row duals."""

    hours: tuple[int, ...]
    values: Mapping[str, float]
    duals: Mapping[str, float] = field(default_factory=dict)
    cone_duals: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    objective: float = math.nan
    mip_gap: float = math.nan
    status: str = "optimal"

    def get(self, prefix: str, t: int, default: float | None = None) -> float:
        key = vname(prefix, t)
        if default is not None:
            return self.values.get(key, default)
        return self.values[key]

    def series(self, prefix: str, hours=None, default: float | None = None) -> list[float]:
        return [self.get(prefix, t, default) for t in (hours if hours is not None else self.hours)]


@dataclass(frozen=True)
class Violation:
    name: str
    kind: str  # bound | integrality | row | cone
    residual: float


def validate_solution(solution: DispatchSolution | Mapping[str, float], model: ProblemIR,
                      tol: float = 1e-6) -> list[Violation]:
    """Independent feasibility check of a point against every constraint of ``model``.

    Row residuals are scaled by ``1 + max(|rhs|, max |a_j x_j|)`` so that rows mixing
    transmission-scale dollars and distribution per-unit values share one tolerance.
    Raises ``ValueError`` if the point does not cover the model's variables.
    """
    x = solution.values if isinstance(solution, DispatchSolution) else solution
    missing = [v.name for v in model.variables if v.name not in x]
    if missing:
        raise ValueError(f"solution does not match model: {len(missing)} variables missing, e.g. {missing[:3]}")
    out: list[Violation] = []
    for v in model.variables:
        val = x[v.name]
        scale = 1.0 + abs(val)
        if val < v.lb - tol * scale or val > v.ub + tol * scale:
            out.append(Violation(v.name, "bound", max(v.lb - val, val - v.ub)))
        if v.kind == "B" and abs(val - round(val)) > tol:
            out.append(Violation(v.name, "integrality", abs(val - round(val))))
    for r in model.rows:
        parts = [c * x[v] for v, c in r.terms]
        lhs = sum(parts)
        scale = 1.0 + max([abs(r.rhs)] + [abs(p) for p in parts])
        if r.sense == "<=":
            res = lhs - r.rhs
        elif r.sense == ">=":
            res = r.rhs - lhs
        else:
            res = abs(lhs - r.rhs)
        if res > tol * scale:
            out.append(Violation(r.name, "row", res))
    for c in model.cones:
        vals = [a.value(x) for a in c.args]
        scale = 1.0 + max(abs(v) for v in vals)
        res = c.residual(x)
        if c.kind == "rsoc":
            res = res / scale
        if res < -tol * scale:
            out.append(Violation(c.name, "cone", res))
    return out


# --------------------------------------------------------------------------- validation


def validate_scenario(network: DistNetwork, tn: TransNetwork, fleet: Fleet,
                      timeline: ScenarioTimeline) -> list[str]:
    """Lists violated invariants; empty means valid. Inputs are never mutated."""
    errs: list[str] = []
    nodes = set(network.nodes)
    H = timeline.horizon_hours

    # radial feeder
    if len(network.lines) != len(network.nodes) - 1:
        errs.append("topology not radial: |lines| != |nodes| - 1")
    adj: dict[int, list[int]] = {n: [] for n in nodes}
    for ln in network.lines:
        if ln.from_node not in nodes or ln.to_node not in nodes:
            errs.append(f"line {ln.from_node}-{ln.to_node} references unknown node")
            continue
        adj[ln.from_node].append(ln.to_node)
        adj[ln.to_node].append(ln.from_node)
        if ln.resistance < 0 or ln.reactance < 0:
            errs.append(f"negative impedance on line {ln.from_node}-{ln.to_node}")
        if not ln.mva_limit > 0:
            errs.append(f"non-positive mva_limit on line {ln.from_node}-{ln.to_node}")
    seen = {network.root_node} if network.root_node in nodes else set()
    stack = list(seen)
    while stack:
        for m in adj.get(stack.pop(), []):
            if m not in seen:
                seen.add(m)
                stack.append(m)
    if seen != nodes:
        errs.append("topology not radial: feeder not connected")
    into = [ln.to_node for ln in network.lines]
    if len(set(into)) != len(into) or network.root_node in into:
        errs.append("topology not radial: lines not oriented away from root")
    if not network.v_min < network.v_max:
        errs.append("v_min must be below v_max")

    # transmission
    buses = set(tn.buses)
    for g in tn.generators:
        if g.p_min > g.p_max:
            errs.append(f"generator {g.name}: p_min > p_max")
        if g.bus not in buses:
            errs.append(f"generator {g.name} on unknown bus")
    for ln in tn.lines:
        if not (ln.flow_min <= 0 <= ln.flow_max):
            errs.append(f"tn line {ln.from_bus}-{ln.to_bus}: flow limits must bracket 0")
        if ln.reactance == 0:
            errs.append(f"tn line {ln.from_bus}-{ln.to_bus}: zero reactance")
    for w in tn.wind_farms:
        if len(w.availability) < H:
            errs.append(f"wind {w.name}: availability shorter than horizon")
        if any(a < 0 for a in w.availability):
            errs.append(f"wind {w.name}: negative availability")
    for ld in tn.loads:
        if len(ld.profile) < H:
            errs.append(f"tn load at bus {ld.bus}: profile shorter than horizon")
    if tn.dn_coupling_bus not in buses:
        errs.append("coupling bus not in transmission network")
    if network.root_tn_bus != tn.dn_coupling_bus:
        errs.append("feeder root bus differs from transmission coupling bus")

    # assets
    for d in fleet.dgs:
        if not (0 <= d.p_min <= d.p_max):
            errs.append(f"dg {d.name}: need 0 <= p_min <= p_max")
        if not (d.ramp_up > 0 and d.ramp_down > 0):
            errs.append(f"dg {d.name}: ramp limits must be positive")
        if d.s_rating < d.p_max:
            errs.append(f"dg {d.name}: s_rating below p_max")
        if d.node not in nodes:
            errs.append(f"dg {d.name}: unknown node")
    for p in fleet.pvs:
        if any(v < 0 for v in p.p_max_profile):
            errs.append(f"pv {p.name}: negative profile")
        if p.p_max_profile and p.inverter_rating < max(p.p_max_profile):
            errs.append(f"pv {p.name}: inverter rating below profile peak")
        if len(p.p_max_profile) < H:
            errs.append(f"pv {p.name}: profile shorter than horizon")
    for h in fleet.h2:
        if not (h.tank_min <= h.initial_mass <= h.tank_max):
            errs.append(f"h2 {h.name}: initial mass outside tank bounds")
        if abs(h.el_kg_max - h.el_conv * h.el_eff * h.el_p_max) > 1e-9:
            errs.append(f"h2 {h.name}: el_kg_max inconsistent with el_conv*el_eff*el_p_max")
        if abs(h.fc_kg_max * h.fc_conv * h.fc_eff - h.fc_p_max) > 1e-9:
            errs.append(f"h2 {h.name}: fc_kg_max inconsistent with fc_p_max")
        if not (0 < h.el_eff <= 1 and 0 < h.fc_eff <= 1):
            errs.append(f"h2 {h.name}: efficiencies must lie in (0, 1]")
        if h.name not in timeline.fcev_demand:
            errs.append(f"h2 {h.name}: missing fcev demand series")
    for b in fleet.batteries:
        if not (0 <= b.initial_soc <= b.capacity):
            errs.append(f"battery {b.name}: initial soc outside [0, capacity]")

    # timeline
    series = {"cbdr": timeline.cbdr, "kappa": timeline.kappa, "dso_bid_price": timeline.dso_bid_price,
              "dso_offer_price": timeline.dso_offer_price}
    if timeline.dn_sell_price:
        series["dn_sell_price"] = timeline.dn_sell_price
    for k, s in series.items():
        if len(s) != H:
            errs.append(f"{k}: length {len(s)} != horizon {H}")
    if any(not (0 <= k <= 1) for k in timeline.kappa):
        errs.append("kappa out of [0,1]")
    for name, s in timeline.fcev_demand.items():
        if any(v < 0 for v in s):
            errs.append(f"fcev demand {name}: negative values")
        if len(s) != H:
            errs.append(f"fcev demand {name}: length {len(s)} != horizon {H}")
    for ld in timeline.dn_load:
        if ld.tier not in TIERS:
            errs.append(f"load node {ld.node}: unknown tier {ld.tier!r}")
        if len(ld.p) != H or len(ld.q) != H:
            errs.append(f"load node {ld.node}: series length != horizon")
    for tier in TIERS:
        if tier not in timeline.voll:
            errs.append(f"voll missing for tier {tier}")
    names = fleet.asset_names()
    for e in timeline.outage_events:
        if e.end_hour < e.start_hour:
            errs.append("outage event ends before it starts")
        for a in e.failed_assets:
            if a not in names:
                errs.append(f"outage event references unknown asset {a}")
    return errs


# --------------------------------------------------------------------------- serialization


def to_jsonable(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    return obj


def from_jsonable(tp: Any, data: Any) -> Any:
    """Inverse of :func:`to_jsonable` driven by the dataclass type hints."""
    origin = typing.get_origin(tp)
    if dataclasses.is_dataclass(tp):
        hints = typing.get_type_hints(tp)
        kw = {f.name: from_jsonable(hints[f.name], data[f.name])
              for f in dataclasses.fields(tp) if f.name in data}
        return tp(**kw)
    if origin is tuple:
        args = typing.get_args(tp)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(from_jsonable(args[0], v) for v in data)
        return tuple(from_jsonable(a, v) for a, v in zip(args, data))
    if origin in (dict, Mapping) or origin is typing.get_origin(Mapping[str, int]):
        kt, vt = typing.get_args(tp)
        return {kt(k) if kt in (int, str) else k: from_jsonable(vt, v) for k, v in data.items()}
    if origin is typing.Union or type(tp).__name__ == "UnionType":
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        return None if data is None else from_jsonable(args[0], data)
    if tp is float:
        return float(data)
    if tp is int:
        return int(data)
    return data
