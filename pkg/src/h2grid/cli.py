"""Command line entry point.

    h2grid solve CASE                      one window over the whole horizon
    h2grid roll CASE --window 48 --commit 24
    h2grid compare-batteries CASE --durations 2,4,6,8
    h2grid report RUNDIR --tables ri,h2cost,dlmp
    h2grid validate CASE [--solution RUNDIR]

CASE is a bundled case name (``case33_24``, ``tutorial``) or a bundle directory.
Outputs go to ``--out``, else ``$H2GRID_OUT``, else ``./h2grid_out``, in a
subdirectory named after the command and case. Failures print one JSON error
record on stderr: exit 2 for bad input, 3 for an infeasible window, 1 otherwise.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import analytics as an
from .cases import load_case
from .core_model import validate_solution
from .io import BundleError, load_solution, save_solution, write_schedule
from .misocp import ModelError, SolveOptions
from .model import build_window_model
from .rolling import RollingOptions, WindowInfeasible, run_rolling

OUT_ENV = "H2GRID_OUT"
SCHEDULE_TOL = 1e-5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def _out_dir(args, name: str) -> Path:
    base = Path(args.out or os.environ.get(OUT_ENV) or "h2grid_out")
    d = base / name
    d.mkdir(parents=True, exist_ok=True)
    return d


def _case_label(case: str) -> str:
    return Path(case).name or case


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _rolling_options(args, mode: str) -> RollingOptions:
    solve = SolveOptions(gap=args.gap, time_limit=args.time_limit)
    return RollingOptions(window=getattr(args, "window", 48), commit=getattr(args, "commit", 24), mode=mode,
                          solve=solve)


def check_schedule(sc, sol) -> int:
    """Violations of the full-horizon model at the committed schedule."""
    wm = build_window_model(sc)
    return len(validate_solution(sol, wm.ir, SCHEDULE_TOL))


def _run(args, mode: str) -> int:
    sc = load_case(args.case)
    out = _out_dir(args, f"{'solve' if mode == 'perfect' else 'roll'}-{_case_label(args.case)}")
    with open(out / "windows.jsonl", "w") as log:
        res = run_rolling(sc, _rolling_options(args, mode), log=log)
    bad = check_schedule(sc, res.solution)
    save_solution(res.solution, out / "solution.json")
    write_schedule(res.solution, out / "schedule.csv")
    summary = {"case": args.case, "mode": mode, "objective": res.solution.objective,
               "mip_gap": res.solution.mip_gap, "status": res.solution.status,
               "windows": [{k: v for k, v in r.log_record().items() if k != "wall_time"} for r in res.windows],
               "schedule_violations": bad}
    _dump_json(out / "summary.json", summary)
    print(json.dumps({"out": str(out), "objective": res.solution.objective, "violations": bad}))
    return 0 if bad == 0 else 1


def cmd_compare(args) -> int:
    sc = load_case(args.case)
    try:
        durations = [float(x) for x in args.durations.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad --durations {args.durations!r}") from None
    out = _out_dir(args, f"compare-{_case_label(args.case)}")
    with open(out / "windows.jsonl", "w") as log:
        cases = an.run_battery_comparison(sc, durations, _rolling_options(args, "rolling"), log=log)
    an.write_csv(out / "table_i.csv", an.TABLE_I_COLUMNS, an.table_i_rows(cases))
    _dump_json(out / "table_i.json", [dict(zip(an.TABLE_I_COLUMNS, r)) for r in an.table_i_rows(cases)])
    print(json.dumps({"out": str(out), "ri": {c.label: round(c.report.ri, 3) for c in cases}}))
    return 0


def cmd_report(args) -> int:
    run = Path(args.run)
    summary_path = run / "summary.json"
    if not summary_path.exists():
        raise BundleError("not a run directory (summary.json missing)", str(run))
    summary = json.loads(summary_path.read_text())
    sc = load_case(summary["case"])
    sol = load_solution(run / "solution.json")
    tables = [t.strip() for t in args.tables.split(",") if t.strip()]
    unknown = set(tables) - {"ri", "h2cost", "dlmp"}
    if unknown:
        raise UsageError(f"unknown tables: {sorted(unknown)}")
    written = []
    if "ri" in tables:
        hrs = an.outage_hours(sc.timeline)
        if hrs:
            rep = an.compute_resilience_index(sol, (hrs[0], hrs[-1]), timeline=sc.timeline)
            row = [summary["case"], "n/a"] + [an.fmt_cell(rep.ens_by_tier.get(k, 0.0)) for k in an.TIERS] + \
                  [an.fmt_cell(rep.total_ens), an.fmt_cell(rep.total_load), an.fmt_cell(rep.ri)]
            written.append(an.write_csv(run / "ri.csv", an.TABLE_I_COLUMNS, [row]))
    if "h2cost" in tables and sc.fleet.h2:
        reps = an.h2_cost_table(sol, sc)
        written.append(an.write_csv(run / "h2cost.csv", an.TABLE_II_COLUMNS,
                                    an.table_ii_rows({summary["mode"]: reps})))
    if "dlmp" in tables:
        d = an.compute_dlmp(sol, sc.network)
        rows = d.rows()
        cols = list(rows[0]) if rows else ["node", "hour"]
        written.append(an.write_csv(run / "dlmp.csv", cols, ([r[c] for c in cols] for r in rows)))
    print(json.dumps({"written": [str(p) for p in written]}))
    return 0


def cmd_validate(args) -> int:
    sc = load_case(args.case)
    rec = {"case": args.case, "dn_nodes": len(sc.network.nodes), "tn_buses": len(sc.tn.buses),
           "dgs": len(sc.fleet.dgs), "pvs": len(sc.fleet.pvs), "h2": len(sc.fleet.h2),
           "batteries": len(sc.fleet.batteries), "hours": sc.timeline.horizon_hours}
    if args.solution:
        rec["schedule_violations"] = check_schedule(sc, load_solution(Path(args.solution) / "solution.json"))
    print(json.dumps(rec, sort_keys=True))
    return 0 if not rec.get("schedule_violations") else 1


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="h2grid", description="Integrated distribution/transmission dispatch with hydrogen storage.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("case")
        sp.add_argument("--out", default=None, help=f"output root (default ${OUT_ENV} or ./h2grid_out)")
        sp.add_argument("--gap", type=float, default=1e-3, help="relative MIP gap")
        sp.add_argument("--time-limit", type=float, default=None, help="seconds per window")

    s = sub.add_parser("solve", help="single window over the full horizon")
    common(s)
    s.set_defaults(fn=lambda a: _run(a, "perfect"))
    r = sub.add_parser("roll", help="rolling horizon")
    common(r)
    r.add_argument("--window", type=int, default=48)
    r.add_argument("--commit", type=int, default=24)
    r.set_defaults(fn=lambda a: _run(a, "rolling"))
    c = sub.add_parser("compare-batteries", help="battery durations versus the H2 fleet")
    common(c)
    c.add_argument("--durations", default="2,4,6,8")
    c.add_argument("--window", type=int, default=48)
    c.add_argument("--commit", type=int, default=24)
    c.set_defaults(fn=cmd_compare)
    rp = sub.add_parser("report", help="tables from a finished run directory")
    rp.add_argument("run")
    rp.add_argument("--tables", default="ri,h2cost,dlmp")
    rp.set_defaults(fn=cmd_report)
    v = sub.add_parser("validate", help="parse and check a bundle, optionally a schedule")
    v.add_argument("case")
    v.add_argument("--solution", default=None, help="run directory whose schedule to re-check")
    v.set_defaults(fn=cmd_validate)
    return p


def _fail(record: dict, code: int) -> int:
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        return _fail({"error": "usage", "message": str(e)}, 2)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.fn(args)
    except UsageError as e:
        return _fail({"error": "usage", "message": str(e)}, 2)
    except BundleError as e:
        return _fail(e.record(), 2)
    except WindowInfeasible as e:
        return _fail(e.record(), 3)
    except (ModelError, ValueError) as e:
        return _fail({"error": type(e).__name__, "message": str(e)}, 1)


if __name__ == "__main__":
    sys.exit(main())
