"""Greedy sensor selectors, a random baseline, and a brute-force oracle.

All selectors consume a :class:`~sensorsel.fisher.CandidateMatrix` and
return 1-based row indices in selection order.  Argmin/argmax ties are
broken toward the lowest candidate index after rounding relative
differences below 1e-12 to zero, so runs are deterministic.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import Enum
from itertools import combinations

import numpy as np

from .errors import (
    EigenSolverError,
    InstanceTooLargeError,
    NoAdmissibleCandidateError,
    SingularInformationError,
    TooManySensorsError,
)
from .fisher import CandidateMatrix, _sym

#: Relative tolerance under which competing objective values count as tied.
TIE_REL = 1e-12

#: Skip threshold factor for the A-greedy projection-residual denominator.
AG_DENOM_REL = 1e-10

#: Maximum number of subsets the brute-force search will enumerate.
BRUTE_GUARD = 10**7

#: Max-norm residual allowed on a cached inverse before it is refreshed.
CACHE_RESIDUAL_TOL = 1e-8


class Method(Enum):
    DG = "dg"
    AG = "ag"
    EG = "eg"
    RANDOM = "random"
    BRUTE = "brute"
    DC = "dc"  # convex relaxation, not implemented


class Criterion(Enum):
    """Objective used by the brute-force search."""

    D = "d"
    A = "a"
    E = "e"


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of one selection run.

    ``per_step_objective`` holds the method's own objective evaluated on
    the selected set after each step (NaN for methods without a stepwise
    objective).  ``wall_time`` is the selection time in seconds.
    """

    method: Method
    indices: tuple[int, ...]
    per_step_objective: tuple[float, ...]
    wall_time: float


def _check_p(n: int, p: int) -> None:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if p > n:
        raise TooManySensorsError(f"requested {p} sensors from {n} candidates")


def _argbest(values: np.ndarray, minimize: bool = False) -> int:
    """Lowest 0-based index among near-tied optima; NaN entries are excluded."""
    v = np.asarray(values, dtype=float)
    if minimize:
        v = -v
    best = np.nanmax(v) if np.any(np.isfinite(v)) else np.nan
    if not np.isfinite(best):
        raise NoAdmissibleCandidateError("no admissible candidate at this step")
    tol = TIE_REL * abs(best)
    return int(np.flatnonzero(v >= best - tol)[0])


def _min_eigs(matrices: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of each matrix in a stacked symmetric batch."""
    try:
        return np.linalg.eigvalsh(matrices)[..., 0]
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from exc


class _GramInverse:
    """Cached inverse of the r x r Gram matrix C^T C during oversampling.

    Rank-one updated after each selection and re-factorized from scratch
    every r updates, or sooner if the max-norm residual check fails.
    """

    def __init__(self, u: np.ndarray, selected: list[int]):
        self.u = u
        self.inv = self._factorize(selected)
        self.updates = 0

    def _factorize(self, selected: list[int]) -> np.ndarray:
        c = self.u[selected]
        gram = _sym(c.T @ c)
        w = np.linalg.eigvalsh(gram)
        if w[0] <= 1e-12 * max(w[-1], 0.0):
            raise SingularInformationError(
                "selected rows span fewer than r directions; Gram matrix singular"
            )
        return np.linalg.inv(gram)

    def add_row(self, row: np.ndarray, selected: list[int]) -> None:
        w = self.inv @ row
        self.inv = self.inv - np.outer(w, w) / (1.0 + row @ w)
        self.updates += 1
        r = self.u.shape[1]
        if self.updates >= r or not self._residual_ok(selected):
            self.inv = self._factorize(selected)
            self.updates = 0

    def _residual_ok(self, selected: list[int]) -> bool:
        if not __debug__:
            return True
        c = self.u[selected]
        gram = c.T @ c
        resid = np.abs(gram @ self.inv - np.eye(gram.shape[0])).max()
        return resid <= CACHE_RESIDUAL_TOL


def select_dg(cand: CandidateMatrix, p: int) -> SelectionResult:
    """Determinant-greedy selection.

    The first min(p, r) sensors are picked by repeated max-residual-norm
    selection with Gram-Schmidt deflation (the column-pivoted-QR pivot
    sequence of U^T); subsequent sensors maximize the determinant via the
    rank-one ratio ``1 + u (C^T C)^-1 u^T``.
    """
    u = cand.rows
    n, r = u.shape
    _check_p(n, p)
    t0 = time.perf_counter()
    selected: list[int] = []
    objective: list[float] = []
    residual = u.copy()
    for _ in range(min(p, r)):
        res2 = np.einsum("ij,ij->i", residual, residual)
        res2[selected] = np.nan
        i = _argbest(res2)
        selected.append(i)
        v = residual[i].copy()
        norm = np.linalg.norm(v)
        if norm > 0.0:
            v /= norm
            residual -= np.outer(residual @ v, v)
        c = u[selected]
        objective.append(float(np.linalg.det(_sym(c @ c.T))))
    if p > r:
        cache = _GramInverse(u, selected)
        for _ in range(r, p):
            y = u @ cache.inv
            gain = 1.0 + np.einsum("ij,ij->i", u, y)
            gain[selected] = np.nan
            i = _argbest(gain)
            selected.append(i)
            cache.add_row(u[i], selected)
            c = u[selected]
            objective.append(float(np.linalg.det(_sym(c.T @ c))))
    wall = time.perf_counter() - t0
    return SelectionResult(
        Method.DG, tuple(i + 1 for i in selected), tuple(objective), wall
    )


def select_ag(cand: CandidateMatrix, p: int) -> SelectionResult:
    """Trace-of-inverse greedy selection.

    While p <= r the step objective is the bordered-inverse ratio
    ``(u C^T (C C^T)^-2 C u^T + 1) / (u (I - C^T (C C^T)^-1 C) u^T)``;
    past r it is ``-(u (C^T C)^-2 u^T) / (1 + u (C^T C)^-1 u^T)``.  Both
    are minimized.  Candidates whose projection residual vanishes are
    skipped for the current step.
    """
    u = cand.rows
    n, r = u.shape
    _check_p(n, p)
    norms2 = cand.row_norms_sq()
    t0 = time.perf_counter()
    selected: list[int] = []
    objective: list[float] = []
    ginv: np.ndarray | None = None  # (C C^T)^-1 while p <= r
    ginv_updates = 0
    cache: _GramInverse | None = None
    for k in range(1, p + 1):
        values = np.full(n, np.nan)
        if k == 1:
            pos = norms2 > 0.0
            values[pos] = 1.0 / norms2[pos]
        elif k <= r:
            c = u[selected]
            t = u @ c.T
            y = t @ ginv
            quad = np.einsum("ij,ij->i", y, y)
            denom = norms2 - np.einsum("ij,ij->i", t, y)
            admissible = denom > AG_DENOM_REL * norms2
            admissible &= norms2 > 0.0
            values[admissible] = (quad[admissible] + 1.0) / denom[admissible]
        else:
            y = u @ cache.inv
            quad = np.einsum("ij,ij->i", y, y)
            denom = 1.0 + np.einsum("ij,ij->i", u, y)
            values = -quad / denom
        values[selected] = np.nan
        i = _argbest(values, minimize=True)
        selected.append(i)
        if k < r:
            ginv, ginv_updates = _grow_rowgram_inverse(
                u, selected, ginv, ginv_updates
            )
            objective.append(float(np.trace(ginv)))
        elif k == r:
            c = u[selected]
            gram = _sym(c @ c.T)
            objective.append(float(np.trace(np.linalg.inv(gram))))
            if p > r:
                cache = _GramInverse(u, selected)
        else:
            cache.add_row(u[i], selected)
            objective.append(float(np.trace(cache.inv)))
    wall = time.perf_counter() - t0
    return SelectionResult(
        Method.AG, tuple(i + 1 for i in selected), tuple(objective), wall
    )


def _grow_rowgram_inverse(
    u: np.ndarray,
    selected: list[int],
    prev_inv: np.ndarray | None,
    updates: int,
) -> tuple[np.ndarray, int]:
    """Extend the cached (C C^T)^-1 after appending a row, bordering the block.

    Falls back to a full re-factorization every r updates.
    """
    c = u[selected]
    k = len(selected)
    r = u.shape[1]
    if prev_inv is None or updates + 1 >= r:
        gram = _sym(c @ c.T)
        w = np.linalg.eigvalsh(gram)
        if w[0] <= 1e-12 * max(w[-1], 0.0):
            raise SingularInformationError("selected rows are linearly dependent")
        return np.linalg.inv(gram), 0
    new = c[-1]
    b = c[:-1] @ new
    gb = prev_inv @ b
    schur = float(new @ new - b @ gb)
    if schur <= 0.0:
        raise SingularInformationError("selected rows are linearly dependent")
    out = np.empty((k, k))
    out[: k - 1, : k - 1] = prev_inv + np.outer(gb, gb) / schur
    out[: k - 1, k - 1] = -gb / schur
    out[k - 1, : k - 1] = -gb / schur
    out[k - 1, k - 1] = 1.0 / schur
    return out, updates + 1


def select_eg(cand: CandidateMatrix, p: int) -> SelectionResult:
    """Minimum-eigenvalue greedy selection.

    Step k maximizes the smallest eigenvalue of the bordered row Gram
    matrix while p <= r and of the rank-one-updated ``C^T C`` past r.
    Each candidate is scored by a full symmetric eigendecomposition of
    the small k x k or r x r matrix.
    """
    u = cand.rows
    n, r = u.shape
    _check_p(n, p)
    norms2 = cand.row_norms_sq()
    t0 = time.perf_counter()
    selected: list[int] = []
    objective: list[float] = []
    gram: np.ndarray | None = None  # C^T C once k reaches r
    for k in range(1, p + 1):
        if k == 1:
            lam = norms2.copy()
        elif k <= r:
            c = u[selected]
            border = u @ c.T
            stacked = np.empty((n, k, k))
            stacked[:, : k - 1, : k - 1] = _sym(c @ c.T)
            stacked[:, : k - 1, k - 1] = border
            stacked[:, k - 1, : k - 1] = border
            stacked[:, k - 1, k - 1] = norms2
            lam = _min_eigs(stacked)
        else:
            stacked = gram[None, :, :] + u[:, :, None] * u[:, None, :]
            lam = _min_eigs(stacked)
        lam[selected] = np.nan
        i = _argbest(lam)
        selected.append(i)
        objective.append(float(lam[i]))
        if k >= r:
            c = u[selected]
            gram = _sym(c.T @ c)
    wall = time.perf_counter() - t0
    return SelectionResult(
        Method.EG, tuple(i + 1 for i in selected), tuple(objective), wall
    )


def select_random(cand: CandidateMatrix, p: int, seed: int) -> SelectionResult:
    """Uniform sampling of p distinct sensors, reproducible per seed.

    Draws come from a PCG64 generator, so identical seeds yield identical
    index sequences on any platform.  No stepwise objective exists, so
    ``per_step_objective`` is all-NaN.
    """
    n = cand.n
    _check_p(n, p)
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(seed))
    picks = rng.choice(n, size=p, replace=False)
    wall = time.perf_counter() - t0
    return SelectionResult(
        Method.RANDOM,
        tuple(int(i) + 1 for i in picks),
        (float("nan"),) * p,
        wall,
    )


def _subset_objective(u: np.ndarray, subset: tuple[int, ...], criterion: Criterion) -> float:
    c = u[list(subset)]
    p, r = c.shape
    gram = _sym(c @ c.T) if p <= r else _sym(c.T @ c)
    if criterion is Criterion.D:
        return float(np.linalg.det(gram))
    w = np.linalg.eigvalsh(gram)
    if criterion is Criterion.E:
        return float(w[0])
    if w[0] <= 1e-12 * max(w[-1], 0.0):
        return math.inf
    return float(np.sum(1.0 / w))


def select_bruteforce(
    cand: CandidateMatrix, p: int, criterion: Criterion
) -> SelectionResult:
    """Exact optimizer over all p-subsets; ties go to the lexicographically
    smallest index set.

    Guarded by :data:`BRUTE_GUARD` on the number of subsets.  The returned
    ``per_step_objective`` is NaN except for the final entry, which holds
    the optimal objective value.
    """
    u = cand.rows
    n = cand.n
    _check_p(n, p)
    total = math.comb(n, p)
    if total > BRUTE_GUARD:
        raise InstanceTooLargeError(f"C({n},{p}) = {total} exceeds guard {BRUTE_GUARD}")
    minimize = criterion is Criterion.A
    t0 = time.perf_counter()
    best_subset: tuple[int, ...] | None = None
    best_value = math.inf if minimize else -math.inf
    for subset in combinations(range(n), p):
        value = _subset_objective(u, subset, criterion)
        if best_subset is None:
            best_subset, best_value = subset, value
            continue
        margin = TIE_REL * abs(best_value) if math.isfinite(best_value) else 0.0
        if minimize:
            improved = value < best_value - margin
        else:
            improved = value > best_value + margin
        if improved:
            best_subset, best_value = subset, value
    wall = time.perf_counter() - t0
    if minimize and not math.isfinite(best_value):
        raise SingularInformationError("every p-subset has a singular Gram matrix")
    steps = [float("nan")] * (p - 1) + [float(best_value)]
    return SelectionResult(
        Method.BRUTE, tuple(i + 1 for i in best_subset), tuple(steps), wall
    )


def run_selector(
    cand: CandidateMatrix,
    p: int,
    method: Method,
    seed: int = 0,
    criterion: Criterion = Criterion.D,
) -> SelectionResult:
    """Dispatch a selection run to the requested method."""
    if method is Method.DG:
        return select_dg(cand, p)
    if method is Method.AG:
        return select_ag(cand, p)
    if method is Method.EG:
        return select_eg(cand, p)
    if method is Method.RANDOM:
        return select_random(cand, p, seed)
    if method is Method.BRUTE:
        return select_bruteforce(cand, p, criterion)
    raise NotImplementedError(
        "convex-relaxation selection (DC) is not implemented"
    )
