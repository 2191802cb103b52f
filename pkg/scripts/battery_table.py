"""Resilience of battery fleets of several durations versus the H2 fleet.

    python3 scripts/battery_table.py [OUTDIR] [--durations 2,4,6,8]
"""
from __future__ import annotations

import sys

from h2grid.cli import main

if __name__ == "__main__":
    args = sys.argv[1:]
    out = args.pop(0) if args and not args[0].startswith("-") else "h2grid_out"
    sys.exit(main(["compare-batteries", "case33_24", "--out", out, *args]))
