import pytest

from ghzlab.game import make_ghz_game


@pytest.fixture
def ghz():
    return make_ghz_game()


_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call" and not (call.when == "setup" and call.excinfo):
        return
    n, title = mark.args
    _CRITERIA[n] = (title, "PASS" if call.excinfo is None else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, status = _CRITERIA[n]
        terminalreporter.write_line(f"[{status}] criterion {n}: {title}")
