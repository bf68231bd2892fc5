"""Acceptance summary: one PASS/FAIL line per criterion after the run."""

from __future__ import annotations

import pytest

_results: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    report = outcome.get_result()
    n, title = marker.args
    entry = _results.setdefault(n, {"title": title, "failed": False, "ran": False})
    entry["failed"] = entry["failed"] or report.failed
    entry["ran"] = entry["ran"] or (report.when == "call" and not report.skipped)


def pytest_deselected(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            n, title = marker.args
            _results.setdefault(n, {"title": title, "failed": False, "ran": False})


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        r = _results[n]
        status = "FAIL" if r["failed"] else ("PASS" if r["ran"] else "NOT RUN")
        terminalreporter.write_line(f"criterion {n:>2} ({r['title']}): {status}")
