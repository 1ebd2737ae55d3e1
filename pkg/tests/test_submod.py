import math
from itertools import combinations

import numpy as np
import pytest

from sensorsel import (
    CandidateMatrix,
    DuplicateSensorError,
    InstanceTooLargeError,
    ObjectiveKind,
    SetObjective,
    check_monotone,
    check_submodular,
    counterexample_report,
    default_epsilon,
    nemhauser_check,
    select_ag,
)

from conftest import char_cubic_min_root, gaussian_candidates


class TestEvaluate:
    def test_a_eps_empty_set_is_exactly_zero(self, cx):
        obj = SetObjective(ObjectiveKind.A_EPS, cx, 1e-3)
        assert obj.evaluate(()) == 0.0

    def test_a_eps_identity_rows_analytic(self):
        r, eps = 3, 1e-2
        obj = SetObjective(ObjectiveKind.A_EPS, CandidateMatrix(np.eye(r)), eps)
        expected = -r / (1.0 + eps) + r / eps
        assert obj.evaluate(range(1, r + 1)) == pytest.approx(expected, rel=1e-12)

    def test_e_raw_matches_characteristic_cubic_oracle(self, cx):
        obj = SetObjective(ObjectiveKind.E_RAW, cx)
        c = cx.rows[:4]
        oracle = char_cubic_min_root(c.T @ c)
        assert obj.evaluate((1, 2, 3, 4)) == pytest.approx(oracle, rel=1e-10)

    def test_empty_set_conventions(self, cx):
        eps = 1e-3
        assert SetObjective(ObjectiveKind.D_EPS, cx, eps).evaluate(()) == eps**3
        assert SetObjective(ObjectiveKind.E_RAW, cx).evaluate(()) == 0.0
        assert SetObjective(ObjectiveKind.E_GRAM_ROW, cx).evaluate(()) == 0.0
        assert SetObjective(ObjectiveKind.MODULAR_NORM, cx).evaluate(()) == 0.0

    def test_e_gram_row_uses_row_gram_regardless_of_size(self, cx):
        obj = SetObjective(ObjectiveKind.E_GRAM_ROW, cx)
        # 5 rows of a rank-3 matrix: the 5x5 row Gram is singular
        assert obj.evaluate((1, 2, 3, 4, 5)) == pytest.approx(0.0, abs=1e-12)

    def test_epsilon_default_is_scale_of_largest_row(self, cx):
        assert default_epsilon(cx) == pytest.approx(1e-6 * 0.43, rel=1e-12)
        obj = SetObjective(ObjectiveKind.A_EPS, cx)
        assert obj.epsilon == pytest.approx(1e-6 * 0.43, rel=1e-12)

    def test_epsilon_must_be_positive(self, cx):
        with pytest.raises(ValueError):
            SetObjective(ObjectiveKind.A_EPS, cx, 0.0)


class TestMarginalGain:
    def test_zero_row_adds_nothing(self):
        rows = np.array([[1.0, 0.5], [0.0, 0.0], [0.3, -0.2]])
        obj = SetObjective(ObjectiveKind.A_EPS, CandidateMatrix(rows), 1e-3)
        assert obj.marginal_gain((1,), 2) == pytest.approx(0.0, abs=1e-12)

    def test_modular_norm_gain_is_set_independent(self, cx):
        obj = SetObjective(ObjectiveKind.MODULAR_NORM, cx)
        norm4 = float(np.sum(cx.rows[3] ** 2))
        for s in [(), (1,), (2, 5), (1, 2, 3)]:
            assert obj.marginal_gain(s, 4) == pytest.approx(norm4, rel=1e-12)

    def test_a_eps_gain_positive_and_matches_direct_difference(self, cx):
        obj = SetObjective(ObjectiveKind.A_EPS, cx, 1e-3)
        gain = obj.marginal_gain((1, 2), 3)
        assert gain > 0.0
        assert gain == pytest.approx(
            obj.evaluate((1, 2, 3)) - obj.evaluate((1, 2)), rel=1e-12
        )

    def test_a_eps_gain_equals_trace_difference_identity(self, cx):
        # gain must equal tr(A^-1) - tr(B^-1) with B = A + u^T u
        eps = 1e-3
        obj = SetObjective(ObjectiveKind.A_EPS, cx, eps)
        s = (1, 2)
        c = cx.take(s)
        a = c.T @ c + eps * np.eye(3)
        u = cx.rows[2]
        b = a + np.outer(u, u)
        oracle = np.trace(np.linalg.inv(a)) - np.trace(np.linalg.inv(b))
        assert obj.marginal_gain(s, 3) == pytest.approx(oracle, rel=1e-10)

    def test_duplicate_raises(self, cx):
        obj = SetObjective(ObjectiveKind.MODULAR_NORM, cx)
        with pytest.raises(DuplicateSensorError):
            obj.marginal_gain((1, 2), 2)


class TestCheckers:
    def test_modular_fixture_is_exactly_modular(self, cx):
        obj = SetObjective(ObjectiveKind.MODULAR_NORM, cx)
        rep = check_submodular(obj, max_set_size=5)
        assert rep.violations_submodular == ()
        assert rep.violations_supermodular == ()
        mon = check_monotone(obj, max_set_size=5)
        assert mon.violations_monotone == ()

    def test_e_raw_violates_both_directions_on_embedded_matrix(self, cx):
        rep = check_submodular(SetObjective(ObjectiveKind.E_RAW, cx), max_set_size=5)
        assert len(rep.violations_submodular) > 0
        assert len(rep.violations_supermodular) > 0
        assert ((1, 2, 3), (1, 2, 3, 4), 5) in rep.violations_submodular
        assert ((1, 2, 3, 4), (1, 2, 3, 4, 5), 6) in rep.violations_supermodular

    def test_e_raw_monotone_in_oversampled_chains(self, cx):
        rep = check_monotone(SetObjective(ObjectiveKind.E_RAW, cx), max_set_size=5)
        r = cx.r
        oversampled = [(s, t) for s, t in rep.violations_monotone if len(s) > r]
        assert oversampled == []

    def test_e_gram_row_not_monotone_across_regimes(self):
        rows = np.array([[1.0, 0.0], [0.0, 0.01]])
        obj = SetObjective(ObjectiveKind.E_GRAM_ROW, CandidateMatrix(rows))
        rep = check_monotone(obj, max_set_size=2)
        assert ((1,), (1, 2)) in rep.violations_monotone

    def test_a_eps_monotone_everywhere(self, cx):
        rep = check_monotone(SetObjective(ObjectiveKind.A_EPS, cx, 1e-3), max_set_size=5)
        assert rep.violations_monotone == ()
        rnd = gaussian_candidates(7, 3, seed=60)
        rep = check_monotone(SetObjective(ObjectiveKind.A_EPS, rnd, 1e-3), max_set_size=5)
        assert rep.violations_monotone == ()

    def test_witnesses_reproduce_their_inequalities(self, cx):
        for kind, eps in [(ObjectiveKind.E_RAW, None), (ObjectiveKind.A_EPS, 1e-3)]:
            obj = SetObjective(kind, cx, eps)
            rep = check_submodular(obj, max_set_size=5)
            for s, t, i in rep.violations_submodular[:10]:
                gain_s = obj.marginal_gain(s, i)
                gain_t = obj.marginal_gain(t, i)
                scale = max(1.0, abs(gain_s), abs(gain_t))
                assert gain_s - gain_t < -rep.tolerance * scale
            for s, t, i in rep.violations_supermodular[:10]:
                gain_s = obj.marginal_gain(s, i)
                gain_t = obj.marginal_gain(t, i)
                scale = max(1.0, abs(gain_s), abs(gain_t))
                assert gain_s - gain_t > rep.tolerance * scale

    def test_checked_pair_counts_cover_the_domain(self):
        cand = gaussian_candidates(5, 2, seed=61)
        obj = SetObjective(ObjectiveKind.MODULAR_NORM, cand)
        max_size = 3
        rep = check_submodular(obj, max_set_size=max_size)
        expected = sum(
            math.comb(5, t) * (2**t - 1) * (5 - t) for t in range(1, max_size + 1)
        )
        assert rep.checked_pairs == expected
        mon = check_monotone(obj, max_set_size=max_size)
        expected_mon = sum(math.comb(5, t) * (2**t - 1) for t in range(1, max_size + 1))
        assert mon.checked_pairs == expected_mon

    def test_guard_rejects_large_instances(self):
        cand = gaussian_candidates(40, 3, seed=62)
        obj = SetObjective(ObjectiveKind.MODULAR_NORM, cand)
        with pytest.raises(InstanceTooLargeError):
            check_submodular(obj, max_set_size=12)


class TestProofIdentities:
    """Numerical checks of the algebra behind the greedy-bound argument.

    The inverse-difference direction A^-1 - B^-1 >= 0 and the Woodbury
    expansion hold; note the squared-inverse difference A^-2 - B^-2 is NOT
    positive semidefinite in general, so it is not asserted here.
    """

    def setup_method(self):
        self.rng = np.random.default_rng(63)

    def _random_nested_pair(self, cand, eps):
        n = cand.n
        size_t = int(self.rng.integers(2, 5))
        t = tuple(sorted(self.rng.choice(n, size=size_t, replace=False) + 1))
        size_s = int(self.rng.integers(1, size_t))
        s = tuple(sorted(self.rng.choice(t, size=size_s, replace=False)))
        rest = tuple(i for i in range(1, n + 1) if i not in t)
        i = int(self.rng.choice(rest))
        cs = cand.take(s)
        cts = cand.take(tuple(j for j in t if j not in s))
        u = cand.rows[i - 1]
        a = cs.T @ cs + eps * np.eye(cand.r)
        b = a + np.outer(u, u)
        return a, b, cts

    def test_woodbury_expansion_matches_direct_inversion(self):
        eps = 1e-3
        for _ in range(10):
            cand = gaussian_candidates(8, 3, seed=int(self.rng.integers(10**6)))
            a, _, cts = self._random_nested_pair(cand, eps)
            direct = np.linalg.inv(a + cts.T @ cts)
            ainv = np.linalg.inv(a)
            inner = np.linalg.inv(np.eye(cts.shape[0]) + cts @ ainv @ cts.T)
            woodbury = ainv - ainv @ cts.T @ inner @ cts @ ainv
            np.testing.assert_allclose(woodbury, direct, rtol=1e-9, atol=1e-12)

    def test_inverse_difference_is_psd(self):
        eps = 1e-3
        for _ in range(10):
            cand = gaussian_candidates(8, 3, seed=int(self.rng.integers(10**6)))
            a, b, _ = self._random_nested_pair(cand, eps)
            diff = np.linalg.inv(a) - np.linalg.inv(b)
            assert np.linalg.eigvalsh((diff + diff.T) / 2)[0] >= -1e-10

    def test_projection_difference_is_psd(self):
        # conjugated resolvent difference, oriented by B >= A
        eps = 1e-3
        for _ in range(10):
            cand = gaussian_candidates(8, 3, seed=int(self.rng.integers(10**6)))
            a, b, cts = self._random_nested_pair(cand, eps)
            k = cts.shape[0]
            term_a = cts.T @ np.linalg.inv(np.eye(k) + cts @ np.linalg.inv(a) @ cts.T) @ cts
            term_b = cts.T @ np.linalg.inv(np.eye(k) + cts @ np.linalg.inv(b) @ cts.T) @ cts
            diff = term_b - term_a
            assert np.linalg.eigvalsh((diff + diff.T) / 2)[0] >= -1e-10


class TestEpsilonConsistency:
    def test_regularized_trace_approaches_plain_trace(self):
        cand = gaussian_candidates(6, 3, seed=64)
        subset = (1, 2, 4, 6)
        c = cand.take(subset)
        gram = c.T @ c
        w = np.linalg.eigvalsh(gram)
        kappa = w[-1] / w[0]
        plain = float(np.sum(1.0 / w))
        for eps in [1e-4, 1e-6, 1e-8]:
            obj = SetObjective(ObjectiveKind.A_EPS, cand, eps)
            regularized = -obj.evaluate(subset) + cand.r / eps
            rel = abs(regularized - plain) / plain
            assert rel <= 10.0 * eps * plain * kappa


class TestAgreementWithSelector:
    def test_a_eps_greedy_matches_ag_for_small_epsilon(self):
        cand = gaussian_candidates(12, 3, seed=65)
        eps = 1e-6 * float(cand.row_norms_sq().max())
        obj = SetObjective(ObjectiveKind.A_EPS, cand, eps)
        p = 6
        ag = select_ag(cand, p).indices
        chosen = []
        for _ in range(p):
            gains = np.full(cand.n, -np.inf)
            for i in range(1, cand.n + 1):
                if i in chosen:
                    continue
                gains[i - 1] = obj.marginal_gain(chosen, i)
            best = np.max(gains)
            pick = int(np.flatnonzero(gains >= best - 1e-12 * abs(best))[0]) + 1
            chosen.append(pick)
        assert tuple(chosen) == ag


class TestCounterexampleReport:
    def test_both_violations_flagged(self):
        rep = counterexample_report()
        assert rep.submodularity_violated is True
        assert rep.supermodularity_violated is True

    def test_gain_orientations(self):
        rep = counterexample_report()
        assert rep.gain5_at_123 < rep.gain5_at_1234
        assert rep.gain6_at_1234 > rep.gain6_at_12345

    def test_eigenvalues_match_characteristic_cubic_oracle(self, cx):
        rep = counterexample_report()
        cases = {
            (1, 2, 3): rep.lam_123,
            (1, 2, 3, 4): rep.lam_1234,
            (1, 2, 3, 4, 5): rep.lam_12345,
            (1, 2, 3, 5): rep.lam_1235,
            (1, 2, 3, 4, 6): rep.lam_12346,
            (1, 2, 3, 4, 5, 6): rep.lam_123456,
        }
        for subset, got in cases.items():
            c = cx.take(subset)
            gram = c @ c.T if len(subset) <= 3 else c.T @ c
            assert got == pytest.approx(char_cubic_min_root(gram), rel=1e-10, abs=1e-12)

    def test_text_rendering_mentions_verdict(self):
        text = counterexample_report().to_text()
        assert "neither submodular nor supermodular: True" in text


class TestNemhauserBound:
    def test_identity_rows_reach_ratio_one(self):
        res = nemhauser_check(CandidateMatrix(np.eye(4)), 2, epsilon=1e-3)
        assert res.ratio == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("n,p,seed", [(12, 3, 70), (14, 4, 71), (10, 2, 72)])
    def test_fixed_seed_instances_meet_the_bound(self, n, p, seed):
        cand = gaussian_candidates(n, 3, seed=seed)
        res = nemhauser_check(cand, p, epsilon=1e-3)
        assert res.ratio >= 1.0 - 1.0 / math.e - 1e-9
        assert res.ratio <= 1.0 + 1e-12

    def test_opt_value_matches_reenumeration(self):
        cand = gaussian_candidates(9, 3, seed=73)
        eps = 1e-3
        res = nemhauser_check(cand, 3, epsilon=eps)
        obj = SetObjective(ObjectiveKind.A_EPS, cand, eps)
        brute = max(
            obj.evaluate(sub) for sub in combinations(range(1, 10), 3)
        )
        assert res.opt_value == pytest.approx(brute, rel=1e-12)

    def test_guard(self):
        cand = gaussian_candidates(80, 3, seed=74)
        with pytest.raises(InstanceTooLargeError):
            nemhauser_check(cand, 10, epsilon=1e-3)
