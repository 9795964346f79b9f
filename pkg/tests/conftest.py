import programs


def pytest_terminal_summary(terminalreporter):
    if programs.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in programs.REPORT:
            terminalreporter.write_line(line)
