"""Rolling and perfect-foresight runs of the bundled week, with reports.

    python3 scripts/run_week.py [OUTDIR]
"""
from __future__ import annotations

import sys
from pathlib import Path

from h2grid.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "h2grid_out"
    for cmd in ("roll", "solve"):
        code = main([cmd, "case33_24", "--out", out])
        if code:
            sys.exit(code)
        main(["report", str(Path(out) / f"{cmd}-case33_24")])
