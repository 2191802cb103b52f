from __future__ import annotations

import dataclasses

import pytest

from h2grid.analytics import run_battery_comparison
from h2grid.cases import load_case, tutorial_case
from h2grid.model import build_window_model, solve_window
from h2grid.misocp import SolveOptions
from h2grid.rolling import RollingOptions, run_rolling


@pytest.fixture(scope="session")
def case33():
    return load_case("case33_24")


@pytest.fixture(scope="session")
def tutorial():
    return tutorial_case()


@pytest.fixture(scope="session")
def tutorial_solved(tutorial):
    wm = build_window_model(tutorial)
    res, sol = solve_window(wm, SolveOptions(gap=1e-9))
    return wm, res, sol


@pytest.fixture(scope="session")
def week_rolling(case33):
    return run_rolling(case33, RollingOptions())


@pytest.fixture(scope="session")
def week_perfect(case33):
    return run_rolling(case33, RollingOptions(mode="perfect"))


@pytest.fixture(scope="session")
def battery_cases(case33):
    return run_battery_comparison(case33, (2, 4, 6, 8), keep_solutions=True)


@pytest.fixture(scope="session")
def day_window(case33):
    """First 24 hours of the bundled week, solved."""
    from h2grid.rolling import window_scenario

    sc = window_scenario(case33, 1, 24)
    wm = build_window_model(sc)
    res, sol = solve_window(wm)
    return sc, wm, res, sol


def replace_tl(sc, **kw):
    return sc.replace(timeline=dataclasses.replace(sc.timeline, **kw))


ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Records one line per acceptance criterion, then asserts it."""

    def record(n: int, ok: bool, detail: str) -> None:
        ACCEPTANCE[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(ACCEPTANCE[n])
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
