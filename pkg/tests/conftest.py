"""Shared pytest hooks for the test suite."""

import sys


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance-criterion verdict lines after the test run.

    The acceptance tests record one ``[PASS]/[FAIL]`` line per criterion as
    they execute; default output capture would otherwise swallow the lines
    for passing tests, so they are replayed here where pytest always prints.
    """
    for name, module in sys.modules.items():
        if name.rsplit(".", 1)[-1] == "test_acceptance":
            lines = getattr(module, "_LINES", ())
            if lines:
                terminalreporter.section("acceptance criteria")
                for line in lines:
                    terminalreporter.write_line(line)
            break
