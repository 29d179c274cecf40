"""Per-criterion pass/fail summary for the acceptance suite."""

import re

CRITERIA = {
    1: "column generation LP equals full path LP",
    2: "termination certificate on reduced costs",
    3: "integer gap certificate and design enumeration",
    4: "SPRC equals elementary path enumeration",
    5: "preprocessing keeps every admissible path",
    6: "link LP equals path LP on DAGs",
    7: "robust transform compatibility",
    8: "LP kernel certificates and vertex oracle",
    9: "left-turn sweep on the grid city",
    10: "(R, B) sensitivity sweep on the grid city",
    11: "byte-identical solutions across runs",
}

_NAME = re.compile(r"test_criterion_(\d+)_")
_outcomes: dict[int, list[bool]] = {}


def pytest_runtest_logreport(report):
    m = _NAME.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or report.failed:
        _outcomes.setdefault(int(m.group(1)), []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        runs = _outcomes.get(n)
        verdict = "NOT RUN" if runs is None else "PASS" if all(runs) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {verdict:7s} {title}")
