"""Hydrogen production cost per system for a normal week (event removed) and the
resilient week (event kept), in the layout of the cost table.

    python3 scripts/h2_cost_table.py [OUTDIR]
"""
from __future__ import annotations

import dataclasses
import sys
from pathlib import Path

from h2grid import analytics as an
from h2grid.cases import load_case
from h2grid.rolling import run_rolling

if __name__ == "__main__":
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "h2grid_out")
    sc = load_case("case33_24")
    normal = sc.replace(timeline=dataclasses.replace(sc.timeline, outage_events=()))
    reports = {}
    for mode, case in (("normal", normal), ("resilient", sc)):
        sol = run_rolling(case).solution
        reports[mode] = an.h2_cost_table(sol, case)
    path = an.write_csv(out / "table_ii.csv", an.TABLE_II_COLUMNS, an.table_ii_rows(reports))
    print(path.read_text(), end="")
