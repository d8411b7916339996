import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

_criteria: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion and assert it."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        _criteria.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(_criteria, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
