import sys
from pathlib import Path

import pytest

# lets tests import the shared mpmath oracle module
sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """Record one summary line per acceptance criterion: log(key, passed, detail)."""
    def log(key, passed, detail):
        _ACCEPTANCE[key] = (bool(passed), detail)
        print(f"{key}: {'PASS' if passed else 'FAIL'}  {detail}")
    return log


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in _ACCEPTANCE:
        ok, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"{key}: {'PASS' if ok else 'FAIL'}  {detail}")
