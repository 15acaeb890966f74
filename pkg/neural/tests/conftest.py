"""Pytest hooks for the neural suite; importable builders live in
flow_builders (two test roots share this process, so test modules must
import helpers by a unique module name, never via `conftest`)."""

import pytest

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # Capture hides per-test prints; replay the verdicts in the summary.
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance (neural add-on)")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_report():
    """Record a criterion verdict line for the terminal summary."""

    def _report(line: str) -> None:
        ACCEPTANCE_LINES.append(line)
        print(line)

    return _report
