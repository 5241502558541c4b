import pytest

_LINES = []


@pytest.fixture
def record():
    """Collect one verdict line per acceptance criterion for the run summary."""

    def _record(criterion, passed, detail=""):
        verdict = "INFO" if passed is None else ("PASS" if passed else "FAIL")
        line = f"criterion {criterion}: {verdict}  {detail}".rstrip()
        _LINES.append(line)
        print(line)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
