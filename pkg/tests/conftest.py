"""Shared pytest hooks: print one pass/fail line per acceptance-gate test."""

_GATE_FILE = "test_acceptance.py"
_results = []


def pytest_runtest_logreport(report):
    if report.when != "call" or _GATE_FILE not in report.nodeid:
        return
    label = report.nodeid.split("::")[-1].removeprefix("test_").replace("_", " ")
    _results.append((label, report.passed, report.duration))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _results:
        return
    terminalreporter.section("acceptance gate")
    for label, passed, duration in _results:
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{verdict}] {label} ({duration:.1f}s)")
