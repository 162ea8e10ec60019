from pathlib import Path

import pytest

import rebalgnn

FIXTURE_CSV = Path(rebalgnn.__file__).parent / "data" / "fixture_prices.csv"
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def fixture_csv():
    return FIXTURE_CSV


@pytest.fixture
def record_criterion():
    def record(name: str, ok: bool, detail: str = ""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" -- {detail}" if detail else ""))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
