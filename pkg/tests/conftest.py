import pytest

# (criterion, passed, detail) lines collected by test_acceptance.py
ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    def log(criterion, passed, detail=""):
        ACCEPTANCE_LINES.append((criterion, bool(passed), detail))
    return log


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in ACCEPTANCE_LINES:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {criterion}" + (f" -- {detail}" if detail else ""))
