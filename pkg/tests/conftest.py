import numpy as np
import pytest

from oce_rl.risk import Cvar, Entropic, Expectation, MeanVariance, PiecewiseLinear

_CRITERIA: list[str] = []

FULL_DOMAIN = [
    Expectation(),
    Entropic(0.5),
    Entropic(2.0),
    Cvar(0.25),
    Cvar(0.5),
    MeanVariance(),
    PiecewiseLinear(0.5, 2.0),
    PiecewiseLinear(0.0, 3.0),
]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def report_criterion():
    """Record a PASS/FAIL line that is echoed in the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
        _CRITERIA.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_CRITERIA, key=lambda s: int(s.split()[2].rstrip(":"))):
        terminalreporter.write_line(line)
