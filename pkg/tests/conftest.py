import re

_ACCEPTANCE = {}
_PATTERN = re.compile(r"test_criterion_(\d+)_(\w+)")


def pytest_runtest_logreport(report):
    m = _PATTERN.search(report.nodeid)
    if not m:
        return
    num, name = int(m.group(1)), m.group(2)
    if report.when == "call":
        _ACCEPTANCE[num] = (name, report.outcome)
    elif report.when == "setup" and report.outcome != "passed":
        _ACCEPTANCE[num] = (name, report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria summary")
    for num in sorted(_ACCEPTANCE):
        name, outcome = _ACCEPTANCE[num]
        status = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(
            f"  criterion {num:2d} ({name.replace('_', ' ')}): {status}")
