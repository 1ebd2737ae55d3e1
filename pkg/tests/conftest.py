import numpy as np
import pytest

from sensorsel import CandidateMatrix, counterexample_matrix


@pytest.fixture
def cx() -> CandidateMatrix:
    """The embedded 6x3 counterexample candidate matrix."""
    return counterexample_matrix()


def gaussian_candidates(n: int, r: int, seed: int) -> CandidateMatrix:
    """Fixed-seed Gaussian candidate matrix used across the suite."""
    return CandidateMatrix(np.random.default_rng(seed).standard_normal((n, r)))


def char_cubic_min_root(m: np.ndarray) -> float:
    """Smallest root of the characteristic polynomial of a symmetric 3x3 matrix.

    Independent of the eigensolver: builds the cubic coefficients from the
    trace, the principal 2x2 minors, and the determinant, then calls
    np.roots on the companion polynomial.
    """
    assert m.shape == (3, 3)
    c2 = -np.trace(m)
    minors = 0.0
    for a in range(3):
        for b in range(a + 1, 3):
            minors += m[a, a] * m[b, b] - m[a, b] * m[b, a]
    c0 = -float(np.linalg.det(m))
    roots = np.roots([1.0, c2, minors, c0])
    return float(np.min(np.real(roots)))
