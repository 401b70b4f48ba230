import pytest

ACCEPTANCE_RESULTS = []


@pytest.fixture
def record_criterion():
    """Record one acceptance line: (criterion id, passed, detail)."""
    def record(cid, passed, detail):
        ACCEPTANCE_RESULTS.append((cid, bool(passed), detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {cid}: {detail}")
