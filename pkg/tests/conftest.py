import numpy as np
import pytest
import scipy.linalg


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def expm_displacement(alpha: complex, dim: int) -> np.ndarray:
    """Dense matrix-exponential oracle for the displacement operator."""
    a = np.diag(np.sqrt(np.arange(1.0, dim)), 1)
    return scipy.linalg.expm(alpha * a.conj().T - np.conj(alpha) * a)


def random_density(rng, d: int) -> np.ndarray:
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = m @ m.conj().T
    return rho / np.trace(rho).real


def random_hermitian(rng, d: int) -> np.ndarray:
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return m + m.conj().T
