# Lines recorded by the acceptance tests are echoed in the terminal summary
# so they show up in non -s runs as well.
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=_order):
            terminalreporter.write_line(line)


def _order(line: str):
    head = line.split(":", 1)[0].split()
    try:
        return (0, int(head[-1]))
    except (ValueError, IndexError):
        return (1, line)
