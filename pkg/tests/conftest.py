"""Shared pytest hooks: acceptance results are echoed in the terminal summary."""

import pytest

_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record ``(number, title, passed, detail)`` for the summary table."""

    def record(number, title, passed, detail):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
        _ACCEPTANCE[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
