def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criteria (slow; full-scale drops)")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(REPORT):
            terminalreporter.write_line(line)
