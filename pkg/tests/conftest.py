import numpy as np
import pytest

from ethscale.model import HamiltonianSpec, MixedFieldIsing, Observable, RandomFieldXXZ, SymmetrySector
from ethscale.spectral import SpectralData, compute_spectral_data


@pytest.fixture(scope="session")
def ising9():
    return compute_spectral_data(HamiltonianSpec(MixedFieldIsing(), 9), Observable())


@pytest.fixture(scope="session")
def ising6_full():
    # centre Z is not reflection-even at even L, so use the whole space
    return compute_spectral_data(HamiltonianSpec(MixedFieldIsing(), 6), Observable(), SymmetrySector.none())


@pytest.fixture(scope="session")
def xxz8():
    return compute_spectral_data(HamiltonianSpec(RandomFieldXXZ(seed=2), 8), Observable())


def make_random(D, seed, complex_=False):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((D, D))
    if complex_:
        A = A + 1j * rng.standard_normal((D, D))
    return SpectralData.from_arrays(np.sort(rng.standard_normal(D)), 0.5 * (A + A.conj().T))


# One line per acceptance criterion, collected by tests/test_acceptance.py.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
