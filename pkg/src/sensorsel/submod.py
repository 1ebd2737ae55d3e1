"""Set-function views of the optimality objectives and exhaustive checkers.

The regularized objectives make the selection criteria well defined on
every subset, including the empty set, so that submodularity and
monotonicity can be checked exhaustively on small instances and the
greedy guarantee ``f(S_greedy) >= (1 - 1/e) f(S_opt)`` can be verified
against brute force.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import DuplicateSensorError, InstanceTooLargeError
from .fisher import CandidateMatrix, _sym, build_measurement, fisher_info, min_eig_index
from .selectors import TIE_REL, select_ag

#: Enumeration guard shared by the exhaustive checkers and the bound check.
ENUM_GUARD = 10**7

#: Relative check tolerance for the exhaustive submodularity/monotonicity scans.
DEFAULT_CHECK_TOL = 1e-9

#: A 6-row, 3-mode candidate matrix on which the raw minimum-eigenvalue
#: objective exhibits both increasing and diminishing marginal gains, so it
#: is neither submodular nor supermodular.
E_OPT_COUNTEREXAMPLE = np.array(
    [
        [0.2, -0.1, -0.2],
        [-0.5, -0.1, 0.2],
        [-0.2, 0.3, 0.2],
        [-0.5, 0.3, -0.3],
        [-0.4, -0.3, -0.4],
        [0.3, 0.0, 0.0],
    ]
)


def counterexample_matrix() -> CandidateMatrix:
    """The embedded 6x3 counterexample candidate matrix."""
    return CandidateMatrix(E_OPT_COUNTEREXAMPLE)


class ObjectiveKind(Enum):
    D_EPS = "d_eps"  # det(C^T C + eps I)
    A_EPS = "a_eps"  # -tr[(C^T C + eps I)^-1] + r/eps
    E_RAW = "e_raw"  # lambda_min of the regime Gram matrix
    E_GRAM_ROW = "e_gram_row"  # lambda_min(C C^T) regardless of regime
    MODULAR_NORM = "modular_norm"  # sum of squared row norms (test fixture)


def default_epsilon(cand: CandidateMatrix) -> float:
    """Scale-free regularization default: 1e-6 times the largest squared row norm."""
    return 1e-6 * float(cand.row_norms_sq().max())


@dataclass(frozen=True)
class SetObjective:
    """One of the selection objectives viewed as a set function on {1..n}."""

    kind: ObjectiveKind
    cand: CandidateMatrix
    epsilon: float | None = None

    def __post_init__(self) -> None:
        if self.kind in (ObjectiveKind.D_EPS, ObjectiveKind.A_EPS):
            eps = self.epsilon
            if eps is None:
                eps = default_epsilon(self.cand)
            if not (eps > 0.0):
                raise ValueError(f"epsilon must be positive, got {eps}")
            object.__setattr__(self, "epsilon", float(eps))

    def evaluate(self, subset: Iterable[int]) -> float:
        """Set-function value on ``subset`` (1-based indices, order ignored)."""
        idx = sorted(set(int(i) for i in subset))
        n, r = self.cand.n, self.cand.r
        for i in idx:
            if i < 1 or i > n:
                raise ValueError(f"index {i} outside [1, {n}]")
        if not idx:
            if self.kind is ObjectiveKind.D_EPS:
                return float(self.epsilon**r)
            return 0.0
        c = self.cand.take(idx)
        p = len(idx)
        if self.kind is ObjectiveKind.MODULAR_NORM:
            return float(np.einsum("ij,ij->", c, c))
        if self.kind is ObjectiveKind.A_EPS:
            m = _sym(c.T @ c) + self.epsilon * np.eye(r)
            w = np.linalg.eigvalsh(m)
            return float(-np.sum(1.0 / w) + r / self.epsilon)
        if self.kind is ObjectiveKind.D_EPS:
            m = _sym(c.T @ c) + self.epsilon * np.eye(r)
            return float(np.linalg.det(m))
        if self.kind is ObjectiveKind.E_GRAM_ROW:
            m = _sym(c @ c.T)
        else:  # E_RAW, regime Gram
            m = _sym(c @ c.T) if p <= r else _sym(c.T @ c)
        return float(np.linalg.eigvalsh(m)[0])

    def marginal_gain(self, subset: Iterable[int], i: int) -> float:
        """``f(S + {i}) - f(S)``; raises if ``i`` already belongs to ``S``."""
        idx = set(int(j) for j in subset)
        if int(i) in idx:
            raise DuplicateSensorError(f"index {i} already in the set")
        return self.evaluate(idx | {int(i)}) - self.evaluate(idx)


@dataclass(frozen=True)
class ModularityReport:
    """Outcome of an exhaustive diminishing-returns or monotonicity scan.

    Witness tuples hold 1-based sorted index sets; each one reproduces its
    violated inequality when re-evaluated.
    """

    checked_pairs: int
    tolerance: float
    violations_submodular: tuple = ()
    violations_supermodular: tuple = ()
    violations_monotone: tuple = ()

    @property
    def submodular(self) -> bool:
        return not self.violations_submodular

    @property
    def supermodular(self) -> bool:
        return not self.violations_supermodular

    @property
    def monotone(self) -> bool:
        return not self.violations_monotone

    def to_text(self, label: str = "") -> str:
        lines = []
        head = f"modularity report {label}".rstrip()
        lines.append(f"{head}: checked={self.checked_pairs} tol={self.tolerance:g}")
        lines.append(f"  submodularity violations:  {len(self.violations_submodular)}")
        lines.append(f"  supermodularity violations: {len(self.violations_supermodular)}")
        lines.append(f"  monotonicity violations:   {len(self.violations_monotone)}")
        return "\n".join(lines)

    def witness_rows(self) -> list[dict]:
        """One dict per witness, ready for CSV serialization."""
        rows = []
        for s, t, i in self.violations_submodular:
            rows.append({"check": "submodular", "S": _fmt(s), "T": _fmt(t), "i": i})
        for s, t, i in self.violations_supermodular:
            rows.append({"check": "supermodular", "S": _fmt(s), "T": _fmt(t), "i": i})
        for s, t in self.violations_monotone:
            rows.append({"check": "monotone", "S": _fmt(s), "T": _fmt(t), "i": ""})
        return rows


def _fmt(indices: Sequence[int]) -> str:
    return " ".join(str(i) for i in indices)


def _memoized_values(obj: SetObjective, max_size: int) -> dict[int, float]:
    """Objective value for every subset mask up to ``max_size`` elements."""
    n = obj.cand.n
    values: dict[int, float] = {}
    for size in range(max_size + 1):
        for combo in combinations(range(n), size):
            mask = 0
            for c in combo:
                mask |= 1 << c
            values[mask] = obj.evaluate(tuple(c + 1 for c in combo))
    return values


def _mask_to_tuple(mask: int) -> tuple[int, ...]:
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def _submask_count(n: int, max_set_size: int, with_element: bool) -> int:
    total = 0
    for t in range(max_set_size + 1):
        pairs = math.comb(n, t) * (2**t - 1)
        total += pairs * (n - t) if with_element else pairs
    return total


def check_submodular(
    obj: SetObjective, max_set_size: int, tol: float = DEFAULT_CHECK_TOL
) -> ModularityReport:
    """Exhaustively test diminishing returns over all S < T, |T| <= max_set_size.

    A triple (S, T, i) with i outside T violates submodularity when
    ``gain(i|S) - gain(i|T) < -tol * max(1, |gain_S|, |gain_T|)`` and
    supermodularity when the difference exceeds the same bound upward.
    """
    n = obj.cand.n
    if _submask_count(n, max_set_size, with_element=True) > ENUM_GUARD:
        raise InstanceTooLargeError("submodularity scan exceeds the enumeration guard")
    values = _memoized_values(obj, min(n, max_set_size + 1))
    sub_viol: list[tuple] = []
    super_viol: list[tuple] = []
    checked = 0
    for t_mask, _ in values.items():
        if t_mask == 0 or bin(t_mask).count("1") > max_set_size:
            continue
        s_mask = (t_mask - 1) & t_mask
        while True:
            for i in range(n):
                bit = 1 << i
                if t_mask & bit:
                    continue
                gain_s = values[s_mask | bit] - values[s_mask]
                gain_t = values[t_mask | bit] - values[t_mask]
                checked += 1
                scale = max(1.0, abs(gain_s), abs(gain_t))
                diff = gain_s - gain_t
                witness = (_mask_to_tuple(s_mask), _mask_to_tuple(t_mask), i + 1)
                if diff < -tol * scale:
                    sub_viol.append(witness)
                if diff > tol * scale:
                    super_viol.append(witness)
            if s_mask == 0:
                break
            s_mask = (s_mask - 1) & t_mask
    return ModularityReport(
        checked_pairs=checked,
        tolerance=tol,
        violations_submodular=tuple(sorted(sub_viol)),
        violations_supermodular=tuple(sorted(super_viol)),
    )


def check_monotone(
    obj: SetObjective, max_set_size: int, tol: float = DEFAULT_CHECK_TOL
) -> ModularityReport:
    """Exhaustively test ``f(S) <= f(T)`` over all nested pairs S < T."""
    n = obj.cand.n
    if _submask_count(n, max_set_size, with_element=False) > ENUM_GUARD:
        raise InstanceTooLargeError("monotonicity scan exceeds the enumeration guard")
    values = _memoized_values(obj, min(n, max_set_size))
    viol: list[tuple] = []
    checked = 0
    for t_mask, f_t in values.items():
        if t_mask == 0 or bin(t_mask).count("1") > max_set_size:
            continue
        s_mask = (t_mask - 1) & t_mask
        while True:
            f_s = values[s_mask]
            checked += 1
            if f_t - f_s < -tol * max(1.0, abs(f_s), abs(f_t)):
                viol.append((_mask_to_tuple(s_mask), _mask_to_tuple(t_mask)))
            if s_mask == 0:
                break
            s_mask = (s_mask - 1) & t_mask
    return ModularityReport(
        checked_pairs=checked,
        tolerance=tol,
        violations_monotone=tuple(sorted(viol)),
    )


@dataclass(frozen=True)
class CounterexampleReport:
    """Minimum-eigenvalue gains on the embedded 6x3 matrix.

    Two add-a-sensor scenarios are evaluated on nested prefixes: adding
    row 5 to {1,2,3} versus to {1,2,3,4}, and adding row 6 to {1,2,3,4}
    versus to {1,2,3,4,5}.  The first shows strictly increasing gains
    (submodularity violated), the second strictly diminishing gains
    (supermodularity violated), so the raw minimum-eigenvalue objective is
    neither submodular nor supermodular.
    """

    lam_123: float
    lam_1234: float
    lam_12345: float
    lam_1235: float
    lam_12346: float
    lam_123456: float
    submodularity_violated: bool
    supermodularity_violated: bool

    @property
    def gain5_at_123(self) -> float:
        return self.lam_1235 - self.lam_123

    @property
    def gain5_at_1234(self) -> float:
        return self.lam_12345 - self.lam_1234

    @property
    def gain6_at_1234(self) -> float:
        return self.lam_12346 - self.lam_1234

    @property
    def gain6_at_12345(self) -> float:
        return self.lam_123456 - self.lam_12345

    def to_text(self) -> str:
        lines = [
            "minimum-eigenvalue counterexample (6x3 embedded matrix)",
            f"  lam_min {{1,2,3}}       = {self.lam_123:.12f}",
            f"  lam_min {{1,2,3,4}}     = {self.lam_1234:.12f}",
            f"  lam_min {{1,2,3,4,5}}   = {self.lam_12345:.12f}",
            f"  lam_min {{1,2,3,5}}     = {self.lam_1235:.12f}",
            f"  lam_min {{1,2,3,4,6}}   = {self.lam_12346:.12f}",
            f"  lam_min {{1,2,3,4,5,6}} = {self.lam_123456:.12f}",
            f"  gain of row 5: {self.gain5_at_123:.12f} at {{1,2,3}} < "
            f"{self.gain5_at_1234:.12f} at {{1,2,3,4}} "
            f"-> submodularity violated: {self.submodularity_violated}",
            f"  gain of row 6: {self.gain6_at_1234:.12f} at {{1,2,3,4}} > "
            f"{self.gain6_at_12345:.12f} at {{1,2,3,4,5}} "
            f"-> supermodularity violated: {self.supermodularity_violated}",
            "  verdict: neither submodular nor supermodular: "
            f"{self.submodularity_violated and self.supermodularity_violated}",
        ]
        return "\n".join(lines)


def counterexample_report() -> CounterexampleReport:
    """Evaluate both add-a-sensor scenarios on the embedded matrix."""
    cand = counterexample_matrix()

    def lam(indices: Sequence[int]) -> float:
        return min_eig_index(fisher_info(build_measurement(cand, indices)))

    lam_123 = lam((1, 2, 3))
    lam_1234 = lam((1, 2, 3, 4))
    lam_12345 = lam((1, 2, 3, 4, 5))
    lam_1235 = lam((1, 2, 3, 5))
    lam_12346 = lam((1, 2, 3, 4, 6))
    lam_123456 = lam((1, 2, 3, 4, 5, 6))
    gain5_small = lam_1235 - lam_123
    gain5_large = lam_12345 - lam_1234
    gain6_small = lam_12346 - lam_1234
    gain6_large = lam_123456 - lam_12345
    return CounterexampleReport(
        lam_123=lam_123,
        lam_1234=lam_1234,
        lam_12345=lam_12345,
        lam_1235=lam_1235,
        lam_12346=lam_12346,
        lam_123456=lam_123456,
        submodularity_violated=gain5_small < gain5_large,
        supermodularity_violated=gain6_small > gain6_large,
    )


@dataclass(frozen=True)
class NemhauserResult:
    """Greedy value versus brute-force optimum of the regularized A objective."""

    greedy_value: float
    opt_value: float
    ratio: float
    greedy_indices: tuple[int, ...]
    opt_indices: tuple[int, ...]


def nemhauser_check(cand: CandidateMatrix, p: int, epsilon: float) -> NemhauserResult:
    """Compare the A-greedy selection against the exact p-subset optimum.

    Both sides are scored with the offset objective
    ``-tr[(C^T C + eps I)^-1] + r/eps``, which is monotone submodular, so
    the ratio must be at least ``1 - 1/e``.
    """
    n = cand.n
    total = math.comb(n, p)
    if total > ENUM_GUARD:
        raise InstanceTooLargeError(f"C({n},{p}) = {total} exceeds guard {ENUM_GUARD}")
    obj = SetObjective(ObjectiveKind.A_EPS, cand, epsilon)
    greedy = select_ag(cand, p)
    greedy_value = obj.evaluate(greedy.indices)
    best_subset: tuple[int, ...] | None = None
    best_value = -math.inf
    for subset in combinations(range(1, n + 1), p):
        value = obj.evaluate(subset)
        if best_subset is None or value > best_value + TIE_REL * abs(best_value):
            best_subset, best_value = subset, value
    return NemhauserResult(
        greedy_value=greedy_value,
        opt_value=best_value,
        ratio=greedy_value / best_value,
        greedy_indices=greedy.indices,
        opt_indices=best_subset,
    )
