import acceptance


def pytest_terminal_summary(terminalreporter):
    if not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.line(k))
