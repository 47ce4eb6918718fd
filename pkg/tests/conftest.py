import numpy as np
import pytest

from ffscaling.scenarios import (
    TwoLevelScenario,
    TwoSpinScenario,
    run_two_level,
    run_two_spin,
)

OMEGA = np.pi / 40


@pytest.fixture(scope="session")
def two_level_result():
    return run_two_level(TwoLevelScenario())


@pytest.fixture(scope="session")
def two_spin_result():
    return run_two_spin(TwoSpinScenario())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_hermitian(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (a + a.conj().T)


def random_state(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)
