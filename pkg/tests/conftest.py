import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nvccdd.spin import DriveConfig, SystemParams

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

TWO_PI = 2.0 * math.pi
OMEGA0 = TWO_PI * 2.7081e9
OMEGA1 = TWO_PI * 11.36e6

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)

# (criterion number, summary line) filled by test_acceptance.py
ACCEPTANCE = []


def hamiltonian(ax, ay, az, a0=0.0):
    return a0 * np.eye(2) + 0.5 * (ax * SX + ay * SY + az * SZ)


@pytest.fixture
def system():
    return SystemParams(OMEGA0)


@pytest.fixture
def drive():
    return DriveConfig(OMEGA1)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)
