from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from esencompass.dgps import DgpSpec, simulate

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def garch_null_1000():
    return simulate(DgpSpec("GarchCombo", pi=0.0, n=1000, seed=11))


@pytest.fixture(scope="session")
def garch_null_4000():
    return simulate(DgpSpec("GarchCombo", pi=0.0, n=4000, seed=12))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE: dict = {}


@pytest.fixture
def criterion():
    """Record a criterion verdict: ``criterion(number, passed, detail)``."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
