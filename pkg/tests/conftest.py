"""Acceptance bookkeeping: one PASS/FAIL line per numbered criterion."""

import pytest

_OUTCOMES: dict[int, list[bool]] = {}
_DETAILS: dict[int, list[str]] = {}
_TITLES: dict[int, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n = mark.args[0]
    _TITLES.setdefault(n, mark.kwargs.get("title", ""))
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _OUTCOMES.setdefault(n, []).append(rep.passed)


@pytest.fixture
def detail(request):
    """Attach a measured value to the summary line of the test's criterion."""
    mark = request.node.get_closest_marker("criterion")

    def add(text):
        _DETAILS.setdefault(mark.args[0], []).append(text)

    return add


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        ok = all(_OUTCOMES[n])
        line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {_TITLES[n]}"
        terminalreporter.write_line(line)
        for d in _DETAILS.get(n, []):
            terminalreporter.write_line(f"    {d}")
