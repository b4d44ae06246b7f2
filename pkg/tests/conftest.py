import pytest

from qreliability.core import ModelParams

# (J, gamma1, gamma2): underdamped, overdamped monotone, overdamped nonmonotone
UNDERDAMPED = ModelParams(0.5, 0.2, 0.5)
OVER_MONO = ModelParams(0.5, 3.0, 0.5)
OVER_NONMONO = ModelParams(0.1, 2.5, 1.0)
CRITICAL = ModelParams(0.5, 2.5, 0.5)
REFERENCE_SETS = [UNDERDAMPED, OVER_MONO, OVER_NONMONO]

_ACCEPTANCE = {}


@pytest.fixture
def record_criterion():
    """Register a pass/fail line for the acceptance summary."""

    def record(number, title, passed, detail=""):
        _ACCEPTANCE[number] = (title, bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {title}  {detail}")
