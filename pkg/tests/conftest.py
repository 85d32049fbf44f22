import numpy as np
import pytest
from hypothesis import strategies as st

from qtransfer.hilbert import PhotonState, Space

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
angles = st.floats(-2 * np.pi, 2 * np.pi, allow_nan=False, allow_infinity=False)


def random_state(rng: np.random.Generator, space: Space) -> PhotonState:
    v = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
    return PhotonState.from_vector(space, v / np.linalg.norm(v))


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
