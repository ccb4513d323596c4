import pytest

# criterion number -> (title, passed, seconds)
_RESULTS: dict[int, tuple[str, bool, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    _, ok, seconds = _RESULTS.get(number, (title, True, 0.0))
    # a criterion passes only if setup, call and teardown all pass
    if report.when == "call" or report.failed:
        # a test may report its own timing when the work happens in a fixture
        spent = dict(report.user_properties).get("seconds", report.duration)
        _RESULTS[number] = (title, ok and report.passed, seconds + spent)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, ok, seconds = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}  ({seconds:.1f} s)")
