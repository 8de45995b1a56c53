import logging

import pytest

# acceptance verdicts, echoed in the terminal summary so they survive output capture
VERDICTS = []


@pytest.fixture
def verdict():
    def record(number, name, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
        VERDICTS.append(line)
        print(line)
        assert ok, line

    return record


@pytest.fixture(autouse=True, scope="session")
def _quiet_truncation_warnings():
    # tables at l_max <= 100 always truncate high-k members; the warning is expected
    logging.getLogger("funkframe.frame").setLevel(logging.ERROR)
    yield


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
