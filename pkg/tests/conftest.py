import pytest

_TITLES = {}
_OUTCOMES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k, title): acceptance criterion number k")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _TITLES[m.args[0]] = m.args[1]


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None:
        return
    k = m.args[0]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        now = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        if _OUTCOMES.get(k) != "FAIL":  # parametrized criteria fail if any case fails
            _OUTCOMES[k] = now


def pytest_terminal_summary(terminalreporter):
    if not _TITLES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(_TITLES):
        tr.write_line(f"criterion {k:2d}: {_OUTCOMES.get(k, 'NOT RUN'):7s} {_TITLES[k]}")
