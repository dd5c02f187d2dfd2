import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from floquet_dirac import bloch, dirac
from floquet_dirac.potential import make_canonical_honeycomb

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("quick", max_examples=20, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def V10():
    return make_canonical_honeycomb(10.0)


@pytest.fixture(scope="session")
def dirac10(V10):
    """Dirac point at the default cutoff."""
    return bloch.find_dirac_point(V10, bloch.PlaneWaveBasis.ball(6))


@pytest.fixture(scope="session")
def dirac10_small(V10):
    """Dirac point in the small basis used by the time-dependent runs."""
    return bloch.find_dirac_point(V10, bloch.PlaneWaveBasis.ball(4))


@pytest.fixture(scope="session")
def circ():
    return dirac.circular(1.0, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
