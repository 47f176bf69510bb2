import numpy as np
import pytest
from hypothesis import settings

from qdkerr.ensemble import JitterSpec, PhaseModel, SpinEnsemble, calibrate_jitter
from qdkerr.qed import CavitySpec, DipoleSpec, coupling_from_rate

settings.register_profile("default", max_examples=60, deadline=None)
settings.register_profile("fast", max_examples=10, deadline=None)
settings.load_profile("default")

OMEGA_C = 1_388_000.0  # ueV
KAPPA = 4100.0
DETUNING = 2700.0
OMEGA_X = OMEGA_C - DETUNING


@pytest.fixture
def paper_cavity():
    return CavitySpec(OMEGA_C, KAPPA, 0.9)


@pytest.fixture
def paper_g(paper_cavity):
    return float(coupling_from_rate(0.52, OMEGA_X, paper_cavity))


@pytest.fixture
def paper_dipole(paper_g):
    return DipoleSpec(OMEGA_X, 1.0, paper_g, 0.28)


@pytest.fixture
def paper_model(paper_cavity, paper_dipole):
    return PhaseModel(paper_cavity, paper_dipole, JitterSpec(calibrate_jitter(0.8, 4.5)), SpinEnsemble(0.5))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> one-line PASS/FAIL report, filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
