"""Scenario bundles on disk.

A bundle is a directory holding ``manifest.json`` plus:

- ``dist_network.json``, ``trans_network.json``, ``fleet.json``: static data.
  Hourly profiles are not stored there but in the CSV files below.
- ``events.json``: list of outage events.
- CSV series with an ``hour`` column and ``name [unit]`` headers:
  ``dn_load.csv`` (``p:NODE [MW]``, ``q:NODE [MVAr]``), ``pv.csv`` (``NAME [MW]``),
  ``fcev_demand.csv`` (``NAME [kg]``), ``tn_load.csv`` (``bus:BUS [MW]``),
  ``wind.csv`` (``NAME [MW]``) and ``signals.csv`` (``cbdr [MW]``,
  ``kappa [fraction]``, ``dso_bid_price [$/MWh]``, ``dso_offer_price [$/MWh]``,
  ``dn_sell_price [$/MWh]``).

Parse errors carry the file, line and column of the offending cell.
"""
from __future__ import annotations

import csv
import json
import re
from pathlib import Path
from typing import Any

from .core_model import (BatteryUnit, DgUnit, DispatchSolution, DistNetwork, DnLine, Fleet, Generator, H2System, NodeLoad,
                         OutageEvent, PvUnit, Scenario, ScenarioTimeline, TnLine, TransNetwork, WindFarm,
                         BusLoad, from_jsonable, to_jsonable, validate_scenario)

FORMAT_VERSION = 1
_HEADER = re.compile(r"^\s*(?P<name>[^\[\]]+?)\s*\[(?P<unit>[^\]]+)\]\s*$")
SIGNAL_UNITS = {"cbdr": "MW", "kappa": "fraction", "dso_bid_price": "$/MWh", "dso_offer_price": "$/MWh",
                "dn_sell_price": "$/MWh"}


class BundleError(ValueError):
    def __init__(self, message: str, file: str | None = None, line: int | None = None, column: int | None = None):
        self.file, self.line, self.column = file, line, column
        where = ":".join(str(p) for p in (file, line, column) if p is not None)
        super().__init__(f"{where}: {message}" if where else message)

    def record(self) -> dict[str, Any]:
        return {"error": "bundle", "message": str(self), "file": self.file, "line": self.line, "column": self.column}


# --------------------------------------------------------------------------- CSV


def _fmt(v: float) -> str:
    return repr(float(v))


def write_series(path: Path, hours: range, columns: dict[str, tuple[str, list[float]]]) -> None:
    """``columns`` maps name -> (unit, values)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["hour"] + [f"{k} [{u}]" for k, (u, _) in columns.items()])
        for i, h in enumerate(hours):
            w.writerow([h] + [_fmt(vals[i]) for _, vals in columns.values()])


def read_series(path: Path, horizon: int, start_hour: int, units: dict[str, str] | str
                ) -> dict[str, tuple[float, ...]]:
    """Reads a CSV series file; ``units`` is the expected unit per column or one for all."""
    name = path.name
    if not path.exists():
        raise BundleError("missing series file", name)
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or not rows[0] or rows[0][0].strip() != "hour":
        raise BundleError("first column must be 'hour'", name, 1, 1)
    keys = []
    for c, cell in enumerate(rows[0][1:], start=2):
        m = _HEADER.match(cell)
        if not m:
            raise BundleError(f"header {cell!r} lacks a '[unit]' annotation", name, 1, c)
        key, unit = m["name"], m["unit"]
        want = units if isinstance(units, str) else units.get(key)
        if want is not None and unit != want:
            raise BundleError(f"unit mismatch for {key!r}: got {unit!r}, expected {want!r}", name, 1, c)
        keys.append(key)
    data: dict[str, list[float]] = {k: [] for k in keys}
    body = [r for r in rows[1:] if r]
    for ln, r in enumerate(body, start=2):
        if len(r) != len(keys) + 1:
            raise BundleError(f"expected {len(keys) + 1} cells, found {len(r)}", name, ln)
        try:
            h = int(r[0])
        except ValueError:
            raise BundleError(f"bad hour {r[0]!r}", name, ln, 1) from None
        if h != start_hour + ln - 2:
            raise BundleError(f"hour {h} out of sequence", name, ln, 1)
        for c, (k, cell) in enumerate(zip(keys, r[1:]), start=2):
            try:
                data[k].append(float(cell))
            except ValueError:
                raise BundleError(f"not a number: {cell!r}", name, ln, c) from None
    if len(body) != horizon:
        raise BundleError(f"series {', '.join(keys) or name} has {len(body)} of {horizon} hours", name)
    return {k: tuple(v) for k, v in data.items()}


# --------------------------------------------------------------------------- save


def _dump(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def save_bundle(sc: Scenario, root: str | Path) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    tl = sc.timeline
    hours = tl.hours

    _dump(root / "dist_network.json", to_jsonable(sc.network))
    tn = to_jsonable(sc.tn)
    for w in tn["wind_farms"]:
        del w["availability"]
    tn["load_buses"] = [ld["bus"] for ld in tn.pop("loads")]
    _dump(root / "trans_network.json", tn)
    fleet = to_jsonable(sc.fleet)
    for p in fleet["pvs"]:
        del p["p_max_profile"]
    _dump(root / "fleet.json", fleet)
    _dump(root / "events.json", to_jsonable(tl.outage_events))

    cols: dict[str, tuple[str, list[float]]] = {}
    for ld in tl.dn_load:
        cols[f"p:{ld.node}"] = ("MW", list(ld.p))
        cols[f"q:{ld.node}"] = ("MVAr", list(ld.q))
    write_series(root / "dn_load.csv", hours, cols)
    write_series(root / "pv.csv", hours, {p.name: ("MW", list(p.p_max_profile)) for p in sc.fleet.pvs})
    write_series(root / "fcev_demand.csv", hours, {k: ("kg", list(v)) for k, v in tl.fcev_demand.items()})
    write_series(root / "tn_load.csv", hours, {f"bus:{ld.bus}": ("MW", list(ld.profile)) for ld in sc.tn.loads})
    write_series(root / "wind.csv", hours, {w.name: ("MW", list(w.availability)) for w in sc.tn.wind_farms})
    sig = {"cbdr": tl.cbdr, "kappa": tl.kappa, "dso_bid_price": tl.dso_bid_price,
           "dso_offer_price": tl.dso_offer_price, "dn_sell_price": tl.dn_sell_price or tl.dso_offer_price}
    write_series(root / "signals.csv", hours, {k: (SIGNAL_UNITS[k], list(v)) for k, v in sig.items()})

    manifest = {
        "format": FORMAT_VERSION,
        "name": sc.name,
        "horizon_hours": tl.horizon_hours,
        "start_hour": tl.start_hour,
        "forecast_lead": tl.forecast_lead,
        "voll": dict(tl.voll),
        "fcev_shed_penalty": tl.fcev_shed_penalty,
        "load_tiers": {str(ld.node): ld.tier for ld in tl.dn_load},
        "files": {
            "dist_network": "dist_network.json", "trans_network": "trans_network.json", "fleet": "fleet.json",
            "events": "events.json", "dn_load": "dn_load.csv", "pv": "pv.csv", "fcev_demand": "fcev_demand.csv",
            "tn_load": "tn_load.csv", "wind": "wind.csv", "signals": "signals.csv",
        },
    }
    _dump(root / "manifest.json", manifest)
    return root


# --------------------------------------------------------------------------- load


def _load_json(path: Path) -> Any:
    if not path.exists():
        raise BundleError("missing file", path.name)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise BundleError(e.msg, path.name, e.lineno, e.colno) from None


def _typed(tp, data, file: str):
    try:
        return from_jsonable(tp, data)
    except (KeyError, TypeError, ValueError) as e:
        raise BundleError(f"schema violation: {e}", file) from None


def load_bundle(root: str | Path, validate: bool = True) -> Scenario:
    root = Path(root)
    if not (root / "manifest.json").exists():
        raise BundleError("bundle manifest not found", str(root / "manifest.json"))
    man = _load_json(root / "manifest.json")
    try:
        files = man["files"]
        H = int(man["horizon_hours"])
        h0 = int(man.get("start_hour", 1))
    except (KeyError, TypeError, ValueError) as e:
        raise BundleError(f"schema violation: {e}", "manifest.json") from None
    p = lambda k: root / files[k]  # noqa: E731

    net = _typed(DistNetwork, _load_json(p("dist_network")), files["dist_network"])

    tnj = _load_json(p("trans_network"))
    wind = read_series(p("wind"), H, h0, "MW")
    tload = read_series(p("tn_load"), H, h0, "MW")
    try:
        farms = []
        for w in tnj["wind_farms"]:
            if w["name"] not in wind:
                raise BundleError(f"missing series for wind farm {w['name']}", files["wind"])
            farms.append(WindFarm(w["name"], int(w["bus"]), float(w["marginal_cost"]), wind[w["name"]]))
        loads = []
        for b in tnj["load_buses"]:
            if f"bus:{b}" not in tload:
                raise BundleError(f"missing series bus:{b}", files["tn_load"])
            loads.append(BusLoad(int(b), tload[f"bus:{b}"]))
        tn = TransNetwork(
            buses=tuple(int(b) for b in tnj["buses"]),
            lines=tuple(_typed(TnLine, x, files["trans_network"]) for x in tnj["lines"]),
            generators=tuple(_typed(Generator, x, files["trans_network"]) for x in tnj["generators"]),
            wind_farms=tuple(farms), loads=tuple(loads),
            dn_coupling_bus=int(tnj.get("dn_coupling_bus", 2)), ref_bus=int(tnj.get("ref_bus", 1)))
    except (KeyError, TypeError) as e:
        raise BundleError(f"schema violation: {e}", files["trans_network"]) from None

    fj = _load_json(p("fleet"))
    pv = read_series(p("pv"), H, h0, "MW")
    try:
        pvs = []
        for x in fj["pvs"]:
            if x["name"] not in pv:
                raise BundleError(f"missing series for pv {x['name']}", files["pv"])
            pvs.append(PvUnit(x["name"], int(x["node"]), pv[x["name"]], float(x["inverter_rating"]),
                              float(x["marginal_cost"])))
        fleet = Fleet(
            dgs=tuple(_typed(DgUnit, x, files["fleet"]) for x in fj.get("dgs", [])),
            pvs=tuple(pvs),
            h2=tuple(_typed(H2System, x, files["fleet"]) for x in fj.get("h2", [])),
            batteries=tuple(_typed(BatteryUnit, x, files["fleet"]) for x in fj.get("batteries", [])))
    except (KeyError, TypeError) as e:
        raise BundleError(f"schema violation: {e}", files["fleet"]) from None

    events = tuple(_typed(OutageEvent, e, files["events"]) for e in _load_json(p("events")))
    dl = read_series(p("dn_load"), H, h0, {})
    tiers = man.get("load_tiers", {})
    loads_dn = []
    for node_s, tier in tiers.items():
        kp, kq = f"p:{node_s}", f"q:{node_s}"
        if kp not in dl or kq not in dl:
            raise BundleError(f"missing load series for node {node_s}", files["dn_load"])
        loads_dn.append(NodeLoad(int(node_s), tier, dl[kp], dl[kq]))
    fcev = read_series(p("fcev_demand"), H, h0, "kg")
    sig = read_series(p("signals"), H, h0, SIGNAL_UNITS)
    for k in ("cbdr", "kappa", "dso_bid_price", "dso_offer_price"):
        if k not in sig:
            raise BundleError(f"missing series {k}", files["signals"])
    tl = ScenarioTimeline(
        horizon_hours=H, dn_load=tuple(loads_dn), fcev_demand=fcev, cbdr=sig["cbdr"], kappa=sig["kappa"],
        dso_bid_price=sig["dso_bid_price"], dso_offer_price=sig["dso_offer_price"],
        dn_sell_price=sig.get("dn_sell_price", ()), outage_events=events,
        voll={k: float(v) for k, v in man.get("voll", {}).items()} or ScenarioTimeline.__dataclass_fields__[
            "voll"].default_factory(),
        forecast_lead=int(man.get("forecast_lead", 24)), start_hour=h0,
        fcev_shed_penalty=float(man.get("fcev_shed_penalty", 1e-3)))
    sc = Scenario(net, tn, fleet, tl, name=str(man.get("name", root.name)))
    if validate:
        errs = validate_scenario(net, tn, fleet, tl)
        if errs:
            raise BundleError("validation failed: " + "; ".join(errs), str(root))
    return sc


def bundled_case(name: str = "case33_24") -> Path:
    return Path(__file__).parent / "data" / name


# --------------------------------------------------------------------------- solutions


def save_solution(sol: DispatchSolution, path: str | Path) -> Path:
    """Sorted-key JSON; float repr round-trips, so identical solutions give identical bytes."""
    path = Path(path)
    body = {"hours": list(sol.hours), "objective": sol.objective, "mip_gap": sol.mip_gap, "status": sol.status,
            "values": dict(sol.values), "duals": dict(sol.duals),
            "cone_duals": {k: list(v) for k, v in sol.cone_duals.items()}}
    path.write_text(json.dumps(body, sort_keys=True, separators=(",", ":")) + "\n")
    return path


def load_solution(path: str | Path) -> DispatchSolution:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
        return DispatchSolution(hours=tuple(d["hours"]), values=d["values"], duals=d.get("duals", {}),
                                cone_duals={k: tuple(v) for k, v in d.get("cone_duals", {}).items()},
                                objective=d["objective"], mip_gap=d["mip_gap"], status=d["status"])
    except FileNotFoundError:
        raise BundleError("missing solution file", str(path)) from None
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise BundleError(f"bad solution file: {e}", str(path)) from None


def write_schedule(sol: DispatchSolution, path: str | Path) -> Path:
    """Wide CSV, one row per hour, one column per time-indexed quantity."""
    by: dict[str, dict[int, float]] = {}
    for name, v in sol.values.items():
        at = name.rfind("@")
        if at < 0:
            continue
        by.setdefault(name[:at], {})[int(name[at + 1:])] = v
    cols = sorted(by)
    path = Path(path)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["hour"] + cols)
        for h in sol.hours:
            w.writerow([h] + [_fmt(by[c][h]) if h in by[c] else "" for c in cols])
    return path
