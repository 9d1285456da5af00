import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import ortho_group

from benign_kkt.data_gen import ClustSpec, SgSpec
from benign_kkt.errors import ValidationError
from benign_kkt.geometry import (check_tau_uniform, clust_assumption_report, effective_rank_ratio,
                                 orthogonality_profile, sg_assumption_report, stable_rank,
                                 uniformity_ratio)
from conftest import make_dataset

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


class TestProfile:
    def test_standard_basis(self):
        prof = orthogonality_profile(np.eye(4))
        assert prof.zeta == 0 and prof.p_star is None
        assert prof.p_star_value == math.inf
        assert prof.is_p_orthogonal(1e300)

    def test_hand_pair(self):
        prof = orthogonality_profile(np.array([[1.0, 0.0], [0.1, 1.0]]))
        assert prof.r_min_sq == 1.0
        assert prof.r_max_sq == pytest.approx(1.01)
        assert prof.zeta == pytest.approx(0.1)
        assert prof.p_star == pytest.approx(1 / (1.01 * 2 * 0.1))
        assert prof.p_star == pytest.approx(4.9505, abs=1e-4)

    def test_identical_unit_vectors(self):
        prof = orthogonality_profile(np.array([[0.6, 0.8], [0.6, 0.8]]))
        assert prof.zeta == pytest.approx(1.0)
        assert prof.p_star == pytest.approx(0.5)

    def test_accepts_dataset(self):
        ds = make_dataset([[1.0, 0.0], [0.1, 1.0]], [1, -1])
        assert orthogonality_profile(ds).n == 2

    def test_needs_two_examples(self):
        with pytest.raises(ValidationError):
            orthogonality_profile(np.ones((1, 3)))

    @settings(max_examples=60, deadline=None)
    @given(arrays(float, (5, 4), elements=finite))
    def test_defining_identity_and_supremum(self, X):
        if np.any(np.sum(X**2, axis=1) < 1e-6):
            return
        prof = orthogonality_profile(X)
        assert prof.r_min_sq <= prof.r_max_sq and prof.r_sq >= 1 and prof.zeta >= 0
        if prof.p_star is not None:
            assert prof.p_star * prof.r_sq * prof.n * prof.zeta == pytest.approx(prof.r_min_sq)
            assert prof.is_p_orthogonal(prof.p_star)
            assert not prof.is_p_orthogonal(prof.p_star * (1 + 1e-9))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_permutation_and_rotation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((6, 5))
        base = orthogonality_profile(X)
        perm = orthogonality_profile(X[rng.permutation(6)])
        rot = orthogonality_profile(X @ ortho_group.rvs(5, random_state=seed))
        for other in (perm, rot):
            assert other.p_star == pytest.approx(base.p_star, rel=1e-9)
            assert other.zeta == pytest.approx(base.zeta, rel=1e-9)
            assert other.r_sq == pytest.approx(base.r_sq, rel=1e-9)


class TestUniformity:
    def test_constant(self):
        assert uniformity_ratio([2.5] * 7) == 1.0

    def test_extremes(self):
        assert uniformity_ratio([1, 2, 4]) == 4.0

    @pytest.mark.parametrize("s", [[1.0, 0.0], [1.0, -1.0], [], [np.nan, 1.0]])
    def test_rejects_nonpositive(self, s):
        with pytest.raises(ValidationError):
            uniformity_ratio(s)

    @given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=8), st.floats(1e-3, 1e3))
    def test_scale_invariant(self, s, c):
        assert uniformity_ratio(np.array(s) * c) == pytest.approx(uniformity_ratio(s), rel=1e-12)

    def test_tau_uniform_single_example(self):
        ds = make_dataset([[1.0, 2.0]], [-1])
        assert check_tau_uniform(-np.array([1.0, 2.0]), ds, [1.0], 0.0)

    def test_tau_uniform_sign_mismatch(self):
        ds = make_dataset([[1.0, 0.0], [0.0, 1.0]], [1, 1])
        assert not check_tau_uniform(np.array([1.0, -1.0]), ds, [1.0, 1.0], 1e-8)
        assert not check_tau_uniform(np.array([1.0, 1.0]), ds, [1.0, 0.0], 1e-8)

    def test_tau_uniform_dimension_mismatch(self):
        ds = make_dataset([[1.0, 0.0]], [1])
        with pytest.raises(ValidationError):
            check_tau_uniform(np.ones(3), ds, [1.0], 0.0)


class TestSpectral:
    def test_identity(self):
        assert stable_rank(np.ones(17)) == 17
        assert effective_rank_ratio(np.ones(100)) == pytest.approx(10.0)

    def test_stable_rank_tail(self):
        d = 100
        assert stable_rank(np.r_[math.sqrt(d), np.ones(d - 2)]) == pytest.approx(1.98)

    def test_rank_one(self):
        assert stable_rank([5.0, 0.0, 0.0]) == 1.0

    def test_effective_rank_pgaus(self):
        lam = np.r_[1e3, np.ones(9999)]
        assert effective_rank_ratio(lam) == pytest.approx(10.944, abs=1e-3)

    def test_effective_rank_spike_limit(self):
        assert effective_rank_ratio([1e12, 1.0]) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("fn", [stable_rank, effective_rank_ratio])
    def test_zero_rejected(self, fn):
        with pytest.raises(ValidationError):
            fn(np.zeros(3))

    @given(st.lists(st.floats(0.0, 1e3), min_size=1, max_size=10).filter(lambda v: max(v) > 1e-3),
           st.floats(1e-3, 1e3))
    def test_scale_invariance(self, lam, c):
        lam = np.array(lam)
        assert stable_rank(c * lam) == pytest.approx(stable_rank(lam), rel=1e-9)
        assert effective_rank_ratio(c * lam) == pytest.approx(effective_rank_ratio(lam), rel=1e-9)


class TestAssumptions:
    def test_isotropic_large_d_satisfies_all(self):
        n, delta, C = 9, 0.1, 2.0
        d = math.ceil((C * n * math.log(6 * n**2 / delta)) ** 2) + 1
        rep = sg_assumption_report(SgSpec(np.ones(d), 0.1), n, delta, C)
        assert rep["SG3"].lhs == pytest.approx(math.sqrt(d))
        assert rep.all_satisfied

    def test_spiked_covariance(self):
        d = 10**6
        lam = np.r_[float(d), d**0.25, np.ones(d - 2)]
        rep = sg_assumption_report(SgSpec(lam, 0.1), 5, 0.1, 2.0)
        assert rep["SG2"].satisfied
        assert not rep["SG3"].satisfied

    def test_sg1_fails_for_single_example(self):
        rep = sg_assumption_report(SgSpec(np.ones(4), 0.1), 1, 0.1, 10.0)
        assert rep["SG1"].rhs == pytest.approx(10 * math.log(60))
        assert not rep["SG1"].satisfied

    def test_report_values_exact(self):
        lam = np.array([4.0, 2.0, 1.0])
        rep = sg_assumption_report(SgSpec(lam, 0.1), 10, 0.2, 3.0)
        assert rep["SG2"].lhs == pytest.approx(5 / 4)
        assert rep["SG2"].rhs == pytest.approx(3 * math.log(300))
        assert rep["SG3"].rhs == pytest.approx(3 * 10 * math.log(3000))
        for c in rep.checks:
            assert c.satisfied == (c.lhs >= c.rhs)

    def test_orthogonal_means_cl4(self):
        spec = ClustSpec.orthogonal(50, 4, 3.0, 0.1)
        assert clust_assumption_report(spec, 100, 0.1, 1e9)["CL4"].satisfied

    def test_weak_means_fail_cl3(self):
        spec = ClustSpec.orthogonal(5, 2, 1.0, 0.1)
        rep = clust_assumption_report(spec, 1000, 0.1, 10.0)
        assert rep["CL3"].lhs == 1.0
        assert not rep["CL3"].satisfied

    def test_non_orthogonal_setting_reports(self):
        d, n, k = 10**5, 10, 2
        rng = np.random.default_rng(0)
        means = np.zeros((k, d))
        means[:, :3] = rng.standard_normal((k, 3))
        means *= d ** (1 / 3) / np.linalg.norm(means, axis=1, keepdims=True)
        rep = clust_assumption_report(ClustSpec(means, [1, -1], 0.1), n, 0.1, 2.0)
        assert [c.name for c in rep.checks] == ["CL1", "CL2", "CL3", "CL4"]
        assert "all_satisfied" in rep.to_dict()

    @pytest.mark.parametrize("delta,C", [(0.0, 2.0), (0.5, 2.0), (0.1, 1.0)])
    def test_bad_constants(self, delta, C):
        with pytest.raises(ValidationError):
            sg_assumption_report(SgSpec(np.ones(3), 0.1), 5, delta, C)
        with pytest.raises(ValidationError):
            clust_assumption_report(ClustSpec.orthogonal(5, 2, 1.0, 0.1), 5, delta, C)
