"""Shared pytest hooks.

The acceptance tests register one verdict line per criterion; printing them
from the terminal-summary hook keeps them visible regardless of capture
mode.
"""

verdict_lines: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if verdict_lines:
        terminalreporter.section("acceptance criteria")
        for line in verdict_lines:
            terminalreporter.line(line)
