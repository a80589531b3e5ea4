"""Collects acceptance-criterion outcomes and prints one line per criterion."""
import pytest

_outcomes: dict[int, tuple[str, str, float]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        _outcomes[number] = (title, status, rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        title, status, seconds = _outcomes[number]
        terminalreporter.write_line(f"criterion {number:>2}  {status:<4}  {title}  ({seconds:.1f}s)")
