import math

import pytest

from rose_echo.dynamics import SimulationParams

# (criterion id, passed, detail) rows, printed after the run.
ACCEPTANCE_ROWS = []


@pytest.fixture
def acceptance():
    def record(criterion, passed, detail):
        ACCEPTANCE_ROWS.append((criterion, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_ROWS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(ACCEPTANCE_ROWS, key=lambda r: _order(r[0])):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {criterion:<4} {detail}")


def _order(criterion):
    digits = "".join(c for c in criterion if c.isdigit())
    return (int(digits), criterion)


@pytest.fixture(scope="session")
def coarse_sim():
    """Cheaper ensemble settings that still satisfy the grid and step rules."""
    return SimulationParams(
        dt=3.5e-9, detuning_span=2 * math.pi * 1.5e6, n_detunings=201, record_every=16
    )


@pytest.fixture(scope="session")
def default_expected():
    from rose_echo.runner import compute_expected
    from rose_echo.scenario import paper_defaults

    return compute_expected(paper_defaults())
