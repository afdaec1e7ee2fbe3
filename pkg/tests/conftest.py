"""Shared fixtures and the acceptance-criterion reporter."""

import pytest

# criterion id -> (passed, detail); filled by the acceptance tests
ACCEPTANCE_RESULTS = {}


@pytest.fixture
def acceptance():
    """Record a named acceptance criterion and assert it in one step."""

    def record(cid: str, passed: bool, detail: str = ""):
        ACCEPTANCE_RESULTS[cid] = (bool(passed), detail)
        assert passed, f"{cid} FAIL: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[cid]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{cid}: {status} - {detail}")
