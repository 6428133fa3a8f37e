"""Summary lines for the acceptance criteria.

Tests decorated with ``acceptance.criterion`` report one PASS/FAIL line each
at the end of the session, in criterion order.
"""

import pytest

_RESULTS: dict[int, tuple[str, str, float]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    number = getattr(getattr(item, "obj", None), "criterion_number", None)
    if number is None:
        return
    title = item.obj.criterion_title
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "PASS" if report.passed else "FAIL"
        _RESULTS[number] = (status, title, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        status, title, duration = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}  {status}  {title}  ({duration:.2f} s)")
    passed = sum(1 for s, _, _ in _RESULTS.values() if s == "PASS")
    terminalreporter.write_line(f"{passed}/{len(_RESULTS)} criteria pass")
