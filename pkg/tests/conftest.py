import pytest

_criteria = []


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion id, pass/fail and the measured numbers."""

    def record(cid, ok, detail, expected_failure=False):
        status = "PASS" if ok else ("FAIL (expected, see ledger)" if expected_failure else "FAIL")
        _criteria.append(f"criterion {cid:<4} {status:<28} {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for line in _criteria:
            terminalreporter.write_line(line)
