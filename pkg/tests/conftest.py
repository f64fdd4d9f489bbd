import pytest

ACCEPTANCE_LINES: dict[int, list[str]] = {}


@pytest.fixture
def acceptance_line():
    """Record one status line for an acceptance criterion (printed in the terminal summary)."""

    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.setdefault(number, []).append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        lines = ACCEPTANCE_LINES[number]
        ok = all(": PASS" in line for line in lines)
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({len(lines)} checks)")
        for line in lines:
            terminalreporter.write_line("    " + line)
