import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import pytest

_LINES = []


@pytest.fixture(scope="session")
def report(request):
    """Record one ``criterion: PASS/FAIL`` line; all lines are echoed in the terminal summary."""
    def emit(number, name, ok, detail):
        _LINES.append(f"criterion {number:2d} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
        return ok
    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
