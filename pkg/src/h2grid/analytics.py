"""Post-solve analysis: nodal prices, electrolyzer capacity factor, hydrogen cost,
resilience index and the battery-versus-hydrogen comparison."""
from __future__ import annotations

import csv
import dataclasses
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from .core_model import (TIERS, BatteryUnit, DispatchSolution, DistNetwork, Fleet, H2System, Scenario,
                         ScenarioTimeline, vname)
from .misocp import ModelError

# --------------------------------------------------------------------------- DLMP


@dataclass(frozen=True)
class DlmpPoint:
    """Nodal price in $/MWh and its additive components."""

    total: float
    energy: float
    loss: float
    voltage: float
    congestion: float

    @property
    def residual(self) -> float:
        return self.total - (self.energy + self.loss + self.voltage + self.congestion)


@dataclass(frozen=True)
class DlmpSeries:
    points: Mapping[tuple[int, int], DlmpPoint]  # (node, hour) -> point

    def price(self, node: int, t: int) -> float:
        return self.points[(node, t)].total

    def hours(self) -> list[int]:
        return sorted({t for _, t in self.points})

    def rows(self) -> list[dict]:
        return [{"node": n, "hour": t, "dlmp": p.total, "energy": p.energy, "loss": p.loss,
                 "voltage": p.voltage, "congestion": p.congestion}
                for (n, t), p in sorted(self.points.items(), key=lambda kv: (kv[0][1], kv[0][0]))]


def _cone(solution: DispatchSolution, name: str, k: int) -> float:
    z = solution.cone_duals.get(name)
    if z is None:
        raise ModelError(f"missing cone dual {name}")
    return float(z[k])


def compute_dlmp(solution: DispatchSolution, network: DistNetwork, hours: Iterable[int] | None = None,
                 tol: float = 1e-4) -> DlmpSeries:
    """Prices from the active-power balance duals, split along the feeder path.

    Stationarity of the sending-end flow of line i->j gives, per line,
    ``pi_j - pi_i = -2R*y_vdrop - 2*z_socp - z_send - z_recv``; the first term is
    booked as voltage, the conic flow/current coupling as loss and the two
    apparent-power limits as congestion. Energy is the root-node price.
    Raises :class:`ModelError` when duals are missing or the split does not
    reproduce the price within ``tol * (1 + |price|)``.
    """
    if not solution.duals:
        raise ModelError("solution carries no duals")
    mb = network.base_mva
    hrs = list(hours) if hours is not None else list(solution.hours)
    into = network.parent_line()
    out: dict[tuple[int, int], DlmpPoint] = {}
    for t in hrs:
        def pi(n: int) -> float:
            key = vname(f"bal_p[{n}]", t)
            if key not in solution.duals:
                raise ModelError(f"missing dual {key}")
            return solution.duals[key] / mb

        root = pi(network.root_node)
        step: dict[int, tuple[float, float, float]] = {}
        for ln in network.lines:
            j = ln.to_node
            y_v = solution.duals.get(vname(f"vdrop[{j}]", t))
            if y_v is None:
                raise ModelError(f"missing dual vdrop[{j}]@{t}")
            volt = -2 * ln.resistance * y_v
            loss = -2 * _cone(solution, vname(f"socp[{j}]", t), 2)
            cong = -_cone(solution, vname(f"lim_send[{j}]", t), 1) - _cone(solution, vname(f"lim_recv[{j}]", t), 1)
            step[j] = (volt / mb, loss / mb, cong / mb)
        for n in network.nodes:
            v = l = c = 0.0
            node = n
            while node != network.root_node:
                dv, dl, dc = step[node]
                v, l, c = v + dv, l + dl, c + dc
                node = network.lines[into[node]].from_node
            p = DlmpPoint(pi(n), root, l, v, c)
            if abs(p.residual) > tol * (1 + abs(p.total)):
                raise ModelError(f"price split at node {n} hour {t} off by {p.residual:.3g}")
            out[(n, t)] = p
    return DlmpSeries(out)


# --------------------------------------------------------------------------- hydrogen


def _window(hours: Iterable[int]) -> list[int]:
    hrs = list(hours)
    if not hrs:
        raise ValueError("zero-length window")
    return hrs


def compute_capacity_factor(solution: DispatchSolution, h2: H2System, hours: Iterable[int] | None = None) -> float:
    """Electrolyzer energy over its maximum possible energy in the window."""
    hrs = _window(hours if hours is not None else solution.hours)
    if h2.el_p_max <= 0:
        raise ValueError(f"{h2.name}: electrolyzer rating is zero")
    used = math.fsum(solution.get(f"h2[{h2.name}].p_el", t) for t in hrs)
    return min(1.0, max(0.0, used / (h2.el_p_max * len(hrs))))


@dataclass(frozen=True)
class StorageCostParams:
    capex_per_kg: float = 150.0  # $ per kg of tank capacity
    lifetime_years: float = 20.0


@dataclass(frozen=True)
class H2CostReport:
    system: str
    capacity_factor: float
    electrolysis_cost: float  # $/kg
    storage_cost: float  # $/kg
    produced_kg: float = math.nan
    applicable: bool = True

    @property
    def production_cost(self) -> float:
        return self.electrolysis_cost + self.storage_cost

    @classmethod
    def not_applicable(cls, system: str, capacity_factor: float) -> "H2CostReport":
        return cls(system, capacity_factor, math.nan, math.nan, 0.0, False)


def compute_h2_cost(solution: DispatchSolution, dlmp: DlmpSeries, h2: H2System,
                    hours: Iterable[int] | None = None,
                    params: StorageCostParams = StorageCostParams()) -> H2CostReport:
    """Energy-weighted electricity cost per kg plus tank capital amortised over the
    window and spread over the kilograms produced in it."""
    hrs = _window(hours if hours is not None else solution.hours)
    cf = compute_capacity_factor(solution, h2, hrs)
    kg = math.fsum(solution.get(f"h2[{h2.name}].qh_el", t) for t in hrs)
    if kg <= 1e-9:
        return H2CostReport.not_applicable(h2.name, cf)
    spend = math.fsum(dlmp.price(h2.node, t) * solution.get(f"h2[{h2.name}].p_el", t) for t in hrs)
    share = len(hrs) / (params.lifetime_years * 8760.0)
    storage = params.capex_per_kg * h2.tank_max * share / kg
    return H2CostReport(h2.name, cf, spend / kg, storage, kg)


def h2_cost_table(solution: DispatchSolution, scenario: Scenario, hours: Iterable[int] | None = None,
                  params: StorageCostParams = StorageCostParams()) -> list[H2CostReport]:
    hrs = _window(hours if hours is not None else solution.hours)
    prices = compute_dlmp(solution, scenario.network, hrs)
    return [compute_h2_cost(solution, prices, h, hrs, params) for h in scenario.fleet.h2]


# --------------------------------------------------------------------------- resilience


@dataclass(frozen=True)
class ResilienceReport:
    ens_by_tier: Mapping[str, float]  # MWh
    total_ens: float
    total_load: float
    ri: float  # percent

    def shed_fraction(self, load_by_tier: Mapping[str, float]) -> dict[str, float]:
        return {k: (self.ens_by_tier.get(k, 0.0) / v if v > 0 else 0.0) for k, v in load_by_tier.items()}


def outage_hours(tl: ScenarioTimeline) -> list[int]:
    return sorted({t for e in tl.outage_events for t in range(e.start_hour, e.end_hour + 1) if t in tl.hours})


def load_by_tier(tl: ScenarioTimeline, hours: Iterable[int]) -> dict[str, float]:
    hrs = list(hours)
    out = {k: 0.0 for k in TIERS}
    for ld in tl.dn_load:
        out[ld.tier] = out.get(ld.tier, 0.0) + math.fsum(tl.at(ld.p, t) for t in hrs)
    return out


def compute_resilience_index(source: DispatchSolution | Mapping[str, float] | float,
                             outage_window: tuple[int, int] | None = None, *,
                             timeline: ScenarioTimeline | None = None,
                             total_load: float | None = None) -> ResilienceReport:
    """Served share of load over the outage window, in percent.

    ``source`` is either a solution (with ``outage_window`` inclusive and the
    ``timeline`` that produced it) or already-known energy not supplied, given as a
    per-tier mapping or a single total, together with ``total_load``.
    """
    if isinstance(source, DispatchSolution):
        if timeline is None or outage_window is None:
            raise ValueError("a solution needs its timeline and the outage window")
        lo, hi = outage_window
        hrs = list(range(lo, hi + 1))
        if not hrs or lo < timeline.start_hour or hi >= timeline.start_hour + timeline.horizon_hours:
            raise ValueError(f"outage window {outage_window} outside the horizon")
        ens = {k: 0.0 for k in TIERS}
        for ld in timeline.dn_load:
            ens[ld.tier] += math.fsum(source.get(f"nd[{ld.node}].shed_p", t) for t in hrs)
        total = math.fsum(load_by_tier(timeline, hrs).values())
    else:
        if total_load is None:
            raise ValueError("total_load is required with precomputed ENS")
        ens = dict(source) if isinstance(source, Mapping) else {"total": float(source)}
        total = float(total_load)
    if total <= 0:
        raise ValueError("zero total load in the outage window")
    tot_ens = math.fsum(ens.values())
    if tot_ens < -1e-9 or tot_ens > total * (1 + 1e-9):
        raise ValueError(f"energy not supplied {tot_ens} outside [0, {total}]")
    tot_ens = min(max(tot_ens, 0.0), total)
    ri = 100.0 - 100.0 * tot_ens / total
    if tot_ens > 0 and ri >= 100.0:
        ri = math.nextafter(100.0, 0.0)  # any curtailment keeps the index below 100
    return ResilienceReport(ens, tot_ens, total, ri)


# --------------------------------------------------------------------------- battery comparison


def battery_fleet(fleet: Fleet, duration: float, round_trip_eff: float = 0.90) -> Fleet:
    """Batteries at the H2 sites with the electrolyzer power rating."""
    bats = tuple(BatteryUnit(f"B{k + 1}", h.node, h.el_p_max, duration, round_trip_eff, 0.0)
                 for k, h in enumerate(fleet.h2))
    return dataclasses.replace(fleet, h2=(), batteries=bats)


def without_transit_demand(sc: Scenario) -> Scenario:
    tl = sc.timeline
    zero = {k: tuple(0.0 for _ in v) for k, v in tl.fcev_demand.items()}
    return sc.replace(timeline=dataclasses.replace(tl, fcev_demand=zero))


@dataclass(frozen=True)
class ComparisonCase:
    label: str
    duration: float | None  # None for the hydrogen case
    report: ResilienceReport
    load_by_tier: Mapping[str, float]
    objective: float
    wall_time: float
    solution: DispatchSolution | None = field(default=None, compare=False, repr=False)


def run_battery_comparison(scenario: Scenario, durations: Sequence[float] = (2, 4, 6, 8), options=None,
                           log: IO[str] | None = None, keep_solutions: bool = False) -> list[ComparisonCase]:
    """Rolling runs with batteries of each duration in place of the H2 systems, then
    the H2 fleet itself; transit demand is zeroed in every case and the demand
    response signals are dropped for the battery cases."""
    from .rolling import RollingOptions, run_rolling

    if not scenario.fleet.h2:
        raise ModelError("base scenario has no H2 systems to compare against")
    opts = options or RollingOptions()
    base = without_transit_demand(scenario)
    tl = base.timeline
    hrs = outage_hours(tl)
    if not hrs:
        raise ModelError("scenario has no outage event")
    window = (hrs[0], hrs[-1])
    loads = load_by_tier(tl, range(window[0], window[1] + 1))
    cases = [(f"battery {d:g}h", float(d), base.replace(fleet=battery_fleet(base.fleet, d)), False)
             for d in durations]
    cases.append(("hydrogen", None, base, opts.model.include_cbdr))
    out = []
    for label, dur, sc, cbdr in cases:
        o = dataclasses.replace(opts, model=dataclasses.replace(opts.model, include_cbdr=cbdr))
        t0 = time.perf_counter()
        res = run_rolling(sc, o, log=log)
        rep = compute_resilience_index(res.solution, window, timeline=sc.timeline)
        out.append(ComparisonCase(label, dur, rep, loads, res.solution.objective, time.perf_counter() - t0,
                                  res.solution if keep_solutions else None))
    return out


# --------------------------------------------------------------------------- reports

TABLE_I_COLUMNS = ("case", "duration_h", "ens_critical_mwh", "ens_moderately_critical_mwh",
                   "ens_non_critical_mwh", "ens_total_mwh", "total_load_mwh", "ri_percent")
TABLE_II_COLUMNS = ("system", "mode", "capacity_factor_percent", "electrolysis_cost_per_kg",
                    "storage_cost_per_kg", "production_cost_per_kg")


def fmt_cell(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "n/a"
    return f"{x:.6f}"


def table_i_rows(cases: Sequence[ComparisonCase]) -> list[list[str]]:
    rows = []
    for c in cases:
        r = c.report
        rows.append([c.label, fmt_cell(c.duration)] + [fmt_cell(r.ens_by_tier.get(k, 0.0)) for k in TIERS]
                    + [fmt_cell(r.total_ens), fmt_cell(r.total_load), fmt_cell(r.ri)])
    return rows


def table_ii_rows(reports: Mapping[str, Sequence[H2CostReport]]) -> list[list[str]]:
    rows = []
    for mode, reps in reports.items():
        for r in reps:
            rows.append([r.system, mode, fmt_cell(100 * r.capacity_factor), fmt_cell(r.electrolysis_cost),
                         fmt_cell(r.storage_cost), fmt_cell(r.production_cost)])
    return rows


def write_csv(path: Path | str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path
