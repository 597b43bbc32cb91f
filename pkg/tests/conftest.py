import pytest

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance():
    """Recorder for the acceptance checklist printed after the run."""

    def _record(criterion: str, name: str, status: str, detail: str = "") -> None:
        line = f"[ACCEPTANCE] {criterion} {name}: {status}"
        if detail:
            line += f" ({detail})"
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance checklist:")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line("  " + line)
