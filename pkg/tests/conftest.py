import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from opsys_limits.opsys import diagonal_system, full_matrix_algebra, new_concrete

# derandomized so two runs of the suite see the same examples
settings.register_profile(
    "repo", max_examples=40, deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

PAULI = [
    np.eye(2),
    np.array([[0, 1], [1, 0]]),
    np.array([[0, -1j], [1j, 0]]),
    np.array([[1, 0], [0, -1]]),
]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def M2():
    return full_matrix_algebra(2)


@pytest.fixture(scope="session")
def D2():
    return diagonal_system(2)


@pytest.fixture(scope="session")
def pauli_m2():
    return new_concrete(2, PAULI, "Pauli")


def E(i, j, d):
    m = np.zeros((d, d), dtype=complex)
    m[i, j] = 1
    return m
