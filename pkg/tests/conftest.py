import pytest

_RESULTS: dict[str, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(title): acceptance criterion reported in the terminal summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    title = marker.args[0]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        measured = "; ".join(str(v) for k, v in report.user_properties if k == "measured")
        _RESULTS[item.nodeid] = [title, report.outcome, measured]


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for title, outcome, measured in _RESULTS.values():
        status = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        line = f"{status:5s} {title}"
        if measured:
            line += f"  [{measured}]"
        terminalreporter.write_line(line)
