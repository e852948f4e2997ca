import pytest

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture
def acceptance():
    def record(n: int, ok: bool, detail: str, seconds: float, budget: float):
        timed_ok = ok and seconds < budget
        line = f"criterion {n:>2}: {'PASS' if timed_ok else 'FAIL'}  ({seconds:.1f}s / {budget:g}s)  {detail}"
        ACCEPTANCE_LINES[n] = line
        print(line)
        return timed_ok
    return record
