"""Collects acceptance-criterion outcomes and prints one line per criterion."""

import pytest

_RESULTS = {}
_TITLES = {}
_NOTES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion a test belongs to")


@pytest.fixture
def note(request):
    """Attach a measured value to the criterion line of the calling test."""
    marker = request.node.get_closest_marker("criterion")

    def add(text):
        if marker is not None:
            _NOTES.setdefault(marker.args[0], []).append(text)

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    num, title = marker.args
    _TITLES[num] = title
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        ok = rep.passed
        _RESULTS[num] = _RESULTS.get(num, True) and ok


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_RESULTS, key=int):
        status = "PASS" if _RESULTS[num] else "FAIL"
        line = f"[{status}] criterion {num}: {_TITLES[num]}"
        notes = _NOTES.get(num)
        if notes:
            line += " | " + "; ".join(notes)
        tr.write_line(line)
