"""Linear observation model, least-squares estimation, and optimality indices.

The observation model is ``y = C z`` where the rows of the measurement
matrix ``C`` are rows picked from a candidate matrix ``U`` (n candidate
locations by r latent modes).  All public sensor indices are 1-based, the
index ``i`` referring to row ``i`` of the candidate matrix.

Every quantity switches between two regimes:

* UNDER (``p <= r``): the information matrix is ``C C^T`` (p x p),
* OVER  (``p > r``):  the information matrix is ``C^T C`` (r x r).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DuplicateSensorError,
    EigenSolverError,
    IndexOutOfRangeError,
    RankDeficientError,
    SingularInformationError,
    ZeroReferenceError,
)

#: Relative eigenvalue threshold below which a Gram matrix counts as singular.
EPS_SINGULAR = 1e-12


class Regime(Enum):
    """Which Gram matrix carries the information at the current sensor count."""

    UNDER = "under"
    OVER = "over"


def regime_of(p: int, r: int) -> Regime:
    """Regime for ``p`` sensors and ``r`` modes (UNDER when ``p <= r``)."""
    return Regime.UNDER if p <= r else Regime.OVER


@dataclass(frozen=True)
class CandidateMatrix:
    """Candidate sensor matrix; row ``i`` (1-based) is candidate sensor ``i``.

    Parameters
    ----------
    rows : (n, r) array_like
        Mode coefficients of the n candidate locations.  Entries must be
        finite and the array is copied and frozen on construction.
    """

    rows: np.ndarray

    def __post_init__(self) -> None:
        rows = np.array(self.rows, dtype=float)
        if rows.ndim != 2:
            raise ValueError(f"candidate matrix must be 2-D, got ndim={rows.ndim}")
        if rows.shape[0] < 1 or rows.shape[1] < 1:
            raise ValueError(f"candidate matrix must be at least 1x1, got {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ValueError("candidate matrix contains non-finite entries")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def r(self) -> int:
        return self.rows.shape[1]

    def row_norms_sq(self) -> np.ndarray:
        """Squared Euclidean norm of each candidate row."""
        return np.einsum("ij,ij->i", self.rows, self.rows)

    def take(self, indices: Sequence[int]) -> np.ndarray:
        """Stack rows ``indices`` (1-based, order preserved) into a p x r array."""
        idx = _validated_indices(indices, self.n)
        return self.rows[[i - 1 for i in idx], :].copy()


@dataclass(frozen=True)
class SensorSet:
    """An ordered selection of sensors with its stacked measurement matrix."""

    indices: tuple[int, ...]
    measurement: np.ndarray

    @property
    def p(self) -> int:
        return self.measurement.shape[0]

    @property
    def r(self) -> int:
        return self.measurement.shape[1]

    @property
    def regime(self) -> Regime:
        return regime_of(self.p, self.r)


@dataclass(frozen=True)
class FisherInfo:
    """The regime Gram matrix: ``C C^T`` when UNDER, ``C^T C`` when OVER."""

    regime: Regime
    matrix: np.ndarray


@dataclass(frozen=True)
class NoiseModel:
    """I.i.d. Gaussian observation noise with standard deviation ``sigma``."""

    sigma: float

    def __post_init__(self) -> None:
        if not (self.sigma >= 0.0):
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


def _validated_indices(indices: Iterable[int], n: int) -> tuple[int, ...]:
    idx = tuple(int(i) for i in indices)
    seen = set()
    for i in idx:
        if i < 1 or i > n:
            raise IndexOutOfRangeError(f"sensor index {i} outside [1, {n}]")
        if i in seen:
            raise DuplicateSensorError(f"sensor index {i} selected twice")
        seen.add(i)
    return idx


def _sym(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.T) / 2.0


def _eigvalsh(matrix: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix, wrapping solver failures."""
    try:
        return np.linalg.eigvalsh(matrix)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from exc


def _check_nonsingular(gram: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``gram``, raising if it is singular by the relative test."""
    w = _eigvalsh(_sym(gram))
    if w[0] <= EPS_SINGULAR * max(w[-1], 0.0):
        raise SingularInformationError(
            f"Gram matrix is singular (min eig {w[0]:.3e}, max eig {w[-1]:.3e})"
        )
    return w


def _solve_gram(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``gram @ x = rhs`` by Cholesky, falling back to LU.

    The Gram matrix must pass the singularity test; inverses are never
    formed explicitly.
    """
    gram = _sym(gram)
    _check_nonsingular(gram)
    try:
        factor = scipy.linalg.cho_factor(gram, check_finite=False)
        return scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    except scipy.linalg.LinAlgError:
        lu = scipy.linalg.lu_factor(gram, check_finite=False)
        return scipy.linalg.lu_solve(lu, rhs, check_finite=False)


def build_measurement(cand: CandidateMatrix, indices: Sequence[int]) -> SensorSet:
    """Stack candidate rows ``indices`` (1-based, order preserved) into a SensorSet.

    Raises
    ------
    DuplicateSensorError
        If an index repeats.
    IndexOutOfRangeError
        If an index lies outside [1, n].
    """
    idx = _validated_indices(indices, cand.n)
    if len(idx) < 1:
        raise ValueError("at least one sensor index is required")
    return SensorSet(indices=idx, measurement=cand.take(idx))


def fisher_info(s: SensorSet) -> FisherInfo:
    """Information matrix of a sensor set, symmetrized as ``(M + M^T) / 2``."""
    c = s.measurement
    if s.regime is Regime.UNDER:
        return FisherInfo(Regime.UNDER, _sym(c @ c.T))
    return FisherInfo(Regime.OVER, _sym(c.T @ c))


def det_index(f: FisherInfo) -> float:
    """Determinant of the regime Gram matrix (the D-optimality index)."""
    return float(np.linalg.det(f.matrix))


def trace_inv_index(f: FisherInfo) -> float:
    """Trace of the inverse of the regime Gram matrix (the A-optimality index).

    Raises
    ------
    SingularInformationError
        If the smallest eigenvalue is at or below ``EPS_SINGULAR`` times the
        largest.
    """
    w = _check_nonsingular(f.matrix)
    return float(np.sum(1.0 / w))


def min_eig_index(f: FisherInfo) -> float:
    """Smallest eigenvalue of the regime Gram matrix (the E-optimality index).

    Values within ``EPS_SINGULAR * ||matrix||`` of zero are clamped to zero.
    """
    w = _eigvalsh(_sym(f.matrix))
    lam = float(w[0])
    scale = max(abs(float(w[0])), abs(float(w[-1])))
    if abs(lam) <= EPS_SINGULAR * scale:
        return 0.0
    return lam


def estimate(s: SensorSet, y: np.ndarray) -> np.ndarray:
    """Pseudo-inverse estimate of the latent state from observations ``y``.

    UNDER regime returns the least-norm solution
    ``C^T (C C^T)^-1 y``; OVER regime the least-squares solution
    ``(C^T C)^-1 C^T y``.  ``y`` may be a p-vector or a p x m matrix of
    observation columns.
    """
    c = s.measurement
    y = np.asarray(y, dtype=float)
    if y.shape[0] != s.p:
        raise ValueError(f"y has leading dimension {y.shape[0]}, expected p={s.p}")
    if s.regime is Regime.UNDER:
        return c.T @ _solve_gram(c @ c.T, y)
    return _solve_gram(c.T @ c, c.T @ y)


def error_covariance(
    s: SensorSet,
    noise: NoiseModel,
    prior_zz: np.ndarray | None = None,
) -> np.ndarray:
    """Covariance of the estimation error ``z - z_hat`` in latent coordinates.

    UNDER regime:
    ``(I - P_C) E[z z^T] (I - P_C) + sigma^2 C^T (C C^T)^-2 C`` with
    ``P_C = C^T (C C^T)^-1 C``.  OVER regime: ``sigma^2 (C^T C)^-1``.

    Parameters
    ----------
    prior_zz : (r, r) array_like, optional
        Second-moment matrix of the latent prior, used only in the UNDER
        regime.  Defaults to the identity (unit-variance latent states).
    """
    c = s.measurement
    r = s.r
    sig2 = noise.sigma**2
    if s.regime is Regime.OVER:
        return _sym(sig2 * _solve_gram(c.T @ c, np.eye(r)))
    if prior_zz is None:
        prior = np.eye(r)
    else:
        prior = np.asarray(prior_zz, dtype=float)
        if prior.shape != (r, r):
            raise ValueError(f"prior_zz must be {r}x{r}, got {prior.shape}")
        if not np.allclose(prior, prior.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(prior).max())):
            raise ValueError("prior_zz must be symmetric")
        wp = _eigvalsh(_sym(prior))
        if wp[0] < -EPS_SINGULAR * max(wp[-1], 1.0):
            raise ValueError("prior_zz must be positive semidefinite")
    k = _solve_gram(c @ c.T, c)  # (C C^T)^-1 C, p x r
    proj = c.T @ k
    residual = np.eye(r) - proj
    return _sym(residual @ prior @ residual + sig2 * (k.T @ k))


def observable_transform(s: SensorSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full SVD factors ``(U_C, svals, V_C)`` of the measurement matrix.

    Singular values are sorted descending.  Sign convention: the first
    entry of each left singular vector that is nonzero (relatively, above
    1e-12 of the column peak) is made nonnegative; paired right singular
    vectors are flipped along with it so the product is preserved.
    """
    c = s.measurement
    try:
        u, svals, vt = np.linalg.svd(c, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from exc
    npair = min(s.p, s.r)
    for j in range(u.shape[1]):
        col = u[:, j]
        peak = np.abs(col).max()
        nz = np.flatnonzero(np.abs(col) > 1e-12 * peak)
        lead = col[nz[0]] if nz.size else 0.0
        if lead < 0.0:
            u[:, j] = -col
            if j < npair:
                vt[j, :] = -vt[j, :]
    return u, svals, vt.T


def observable_error_covariance(s: SensorSet, noise: NoiseModel) -> np.ndarray:
    """Error covariance restricted to the observable subspace.

    UNDER regime returns the p x p matrix ``sigma^2 U_C^T (C C^T)^-1 U_C``;
    OVER regime the r x r matrix ``sigma^2 V_C^T (C^T C)^-1 V_C``.  Either
    way the eigenvalues equal those of ``sigma^2 (Gram)^-1``.

    Raises
    ------
    RankDeficientError
        If C lacks full row rank (UNDER) or full column rank (OVER).
    SingularInformationError
        If the Gram matrix fails the singularity test.
    """
    c = s.measurement
    u, svals, v = observable_transform(s)
    smax = svals[0] if svals.size else 0.0
    smin = svals[-1] if svals.size else 0.0
    if smin**2 <= EPS_SINGULAR * smax**2:
        raise RankDeficientError(
            f"measurement matrix is rank deficient (sigma_min {smin:.3e})"
        )
    sig2 = noise.sigma**2
    if s.regime is Regime.UNDER:
        return _sym(sig2 * (u.T @ _solve_gram(c @ c.T, u)))
    return _sym(sig2 * (v.T @ _solve_gram(c.T @ c, v)))


def reconstruction_error(z_true: np.ndarray, z_est: np.ndarray) -> float:
    """Relative Frobenius error ``||z_est - z_true||_F / ||z_true||_F``.

    Raises
    ------
    ZeroReferenceError
        If ``z_true`` has zero norm.
    """
    zt = np.asarray(z_true, dtype=float)
    ze = np.asarray(z_est, dtype=float)
    if zt.shape != ze.shape:
        raise ValueError(f"shape mismatch: {zt.shape} vs {ze.shape}")
    denom = float(np.linalg.norm(zt))
    if denom == 0.0:
        raise ZeroReferenceError("true latent matrix has zero norm")
    return float(np.linalg.norm(ze - zt)) / denom
