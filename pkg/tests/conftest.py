import pytest

_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record a one-line acceptance verdict, echoed in the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> None:
        _VERDICTS.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
