"""Acceptance reporting: one PASS/FAIL line per criterion in the terminal summary."""

import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        number, title = marker.args
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        if hasattr(report, "wasxfail"):
            verdict = "FAIL"
            detail = (detail + "; " if detail else "") + f"known failure: {report.wasxfail}"
        else:
            verdict = "PASS" if report.passed else "FAIL"
        _RESULTS.setdefault(number, (title, []))[1].append((verdict, detail))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, parts = _RESULTS[number]
        verdict = "PASS" if all(v == "PASS" for v, _ in parts) else "FAIL"
        detail = "; ".join(d for _, d in parts if d)
        line = f"criterion {number} {verdict}: {title}"
        if detail:
            line += f" [{detail}]"
        terminalreporter.write_line(line)
