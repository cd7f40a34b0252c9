"""Terminal summary listing acceptance criteria pass/fail, one line each."""

_acceptance_results = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "test_acceptance.py" in report.nodeid and "::test_criterion" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        _acceptance_results[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_acceptance_results):
        outcome = _acceptance_results[name].upper()
        terminalreporter.write_line(f"{name}: {outcome}")
