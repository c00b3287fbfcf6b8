import numpy as np
import pytest

from funcband.curves import FunctionalSeries, Grid
from funcband.sim import case_config, simulate_farma


@pytest.fixture
def grid21():
    return Grid.uniform(21)


@pytest.fixture(scope="session")
def case1_series():
    return simulate_farma(case_config("I", n=120, seed=11))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_series(rng, n=40, J=11):
    return FunctionalSeries(Grid.uniform(J), rng.standard_normal((n, J)))


_VERDICTS = []


@pytest.fixture
def verdict(capsys):
    """Record and print one ``criterion N: PASS|FAIL`` line, then assert."""
    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS.append((number, line))
        with capsys.disabled():
            print(f"\n{line}")
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
