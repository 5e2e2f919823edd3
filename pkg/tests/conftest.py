import pytest

_LINES = []


class Reporter:
    """Records one pass/fail line per acceptance criterion."""

    def __call__(self, criterion, description, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        line = f"{status} criterion {criterion}: {description}"
        if detail:
            line += f" ({detail})"
        _LINES.append(line)
        print(line)
        return ok


@pytest.fixture(scope="session")
def report():
    return Reporter()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
