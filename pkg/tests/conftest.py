import pytest

_ACCEPTANCE_RESULTS: list[tuple[str, bool]] = []


@pytest.fixture
def acceptance_record(request):
    """Collect one pass/fail line per acceptance criterion for the summary."""

    def record(name: str, passed: bool, detail: str = ""):
        _ACCEPTANCE_RESULTS.append((name, passed, detail))
        line = f"ACCEPTANCE {name}: {'PASS' if passed else 'FAIL'}"
        if detail:
            line += f"  ({detail})"
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, passed, detail in _ACCEPTANCE_RESULTS:
        line = f"{name}: {'PASS' if passed else 'FAIL'}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
