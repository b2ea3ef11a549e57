import pytest

VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[VERDICTS] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s.split("[", 1)[1]):
            terminalreporter.write_line(line)


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for a criterion and fail the test on FAIL."""
    reporter = request.config.pluginmanager.getplugin("terminalreporter")

    def emit(n, title, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} [{n}] {title}: {detail}"
        request.config.stash[VERDICTS].append(line)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        assert ok, f"criterion {n} failed: {detail}"

    return emit
