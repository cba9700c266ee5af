import math

import numpy as np
import pytest

from walkoff.grids import Axis
from walkoff.state import AnsatzParams, SampledMomentumState, build_ansatz_wavefunction

# desk fixture shared by the cross-engine and post-selection checks
DESK_AXIS = Axis.symmetric(16.0, 64)
DESK_ANSATZ = AnsatzParams(w_phi=4.0, xi=-2.0, rho=8.0, x0=30.0, w_p=6.0)


@pytest.fixture(scope="session")
def desk_ansatz():
    return build_ansatz_wavefunction(DESK_ANSATZ, DESK_AXIS)


@pytest.fixture(scope="session")
def desk_ansatz_flat():
    return build_ansatz_wavefunction(
        AnsatzParams(w_phi=4.0, xi=-2.0, rho=math.inf, x0=30.0, w_p=6.0), DESK_AXIS
    )


@pytest.fixture(scope="session")
def desk_momentum(desk_ansatz):
    return SampledMomentumState(desk_ansatz.grid)


def rel_l2(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


# one summary line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
