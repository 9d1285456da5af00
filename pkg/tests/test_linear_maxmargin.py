import numpy as np
import pytest

from benign_kkt.data_gen import Dataset, SgSpec, sample
from benign_kkt.errors import InfeasibleError, ValidationError
from benign_kkt.geometry import orthogonality_profile, uniformity_ratio
from benign_kkt.linear_maxmargin import (MarginSolution, brute_force_max_margin,
                                         lambda_bounds_linear, solve_max_margin,
                                         tau_bound_linear, verify_linear_kkt)
from conftest import make_dataset


def random_separable(rng, n, d) -> Dataset:
    X = rng.standard_normal((n, d))
    w_star = rng.standard_normal(d)
    s = X @ w_star
    keep = np.abs(s) > 1e-3
    X, s = X[keep], s[keep]
    if X.shape[0] == 0:
        return random_separable(rng, n, d)
    return make_dataset(X, np.where(s > 0, 1, -1))


class TestFixtures:
    def test_single_point(self):
        ds = make_dataset([[2.0, 0.0]], [1])
        for sol in (solve_max_margin(ds), brute_force_max_margin(ds)):
            assert np.allclose(sol.w, [0.5, 0.0], atol=1e-12)
            assert np.allclose(sol.lam, [0.25], atol=1e-12)
            assert np.allclose(sol.margins, [1.0], atol=1e-12)

    def test_orthogonal_pair(self):
        ds = make_dataset([[1.0, 0.0], [0.0, 1.0]], [1, -1])
        for sol in (solve_max_margin(ds), brute_force_max_margin(ds)):
            assert np.allclose(sol.w, [1.0, -1.0], atol=1e-12)
            assert np.allclose(sol.lam, [1.0, 1.0], atol=1e-12)

    def test_conflicting_duplicate(self):
        ds = make_dataset([[1.0, 0.0], [1.0, 0.0]], [1, -1])
        with pytest.raises(InfeasibleError) as exc:
            solve_max_margin(ds)
        assert exc.value.best is not None
        with pytest.raises(InfeasibleError):
            brute_force_max_margin(ds)

    def test_non_separable_but_not_duplicate(self):
        # XOR-like in 1-d without bias: +x and -x with the same label
        ds = make_dataset([[1.0], [-2.0]], [1, 1])
        with pytest.raises(InfeasibleError):
            solve_max_margin(ds)

    def test_zero_example(self):
        with pytest.raises(InfeasibleError):
            solve_max_margin(make_dataset([[0.0, 0.0], [1.0, 0.0]], [1, 1]))

    def test_brute_force_size_limit(self):
        with pytest.raises(ValidationError):
            brute_force_max_margin(make_dataset(np.eye(13), np.ones(13, int)))

    def test_inactive_constraint(self):
        # second point lies beyond the margin of the first
        ds = make_dataset([[1.0, 0.0], [3.0, 0.5]], [1, 1])
        sol = solve_max_margin(ds)
        assert np.allclose(sol.w, [1.0, 0.0], atol=1e-10)
        assert sol.lam[1] == 0.0


class TestKktVerification:
    def test_solver_passes(self):
        ds = sample(SgSpec.gaussian_family(200, 0.5, 0.1), 15, 3)
        rep = verify_linear_kkt(solve_max_margin(ds), ds, tol=1e-6)
        assert rep.passes
        assert rep.stationarity == 0.0

    def test_scaled_primal_fails(self):
        ds = make_dataset([[1.0, 0.0], [0.0, 1.0]], [1, -1])
        sol = solve_max_margin(ds)
        bad = MarginSolution(2 * sol.w, sol.lam, 2 * sol.margins, 0.0, 0, False)
        rep = verify_linear_kkt(bad, ds)
        assert rep.stationarity == pytest.approx(0.5)
        assert not rep.passes

    def test_negative_multiplier(self):
        ds = make_dataset([[1.0, 0.0], [0.0, 1.0]], [1, -1])
        sol = solve_max_margin(ds)
        bad = MarginSolution(sol.w, np.array([1.0, -0.5]), sol.margins, 0.0, 0, False)
        rep = verify_linear_kkt(bad, ds)
        assert rep.dual_feasibility == -0.5 and not rep.passes

    def test_dimension_mismatch(self):
        ds = make_dataset([[1.0, 0.0]], [1])
        with pytest.raises(ValidationError):
            verify_linear_kkt(MarginSolution(np.ones(3), np.ones(1), np.ones(1), 0.0, 0, True), ds)


class TestOracle:
    def test_dual_matches_brute_force(self):
        rng = np.random.default_rng(2024)
        for _ in range(60):
            ds = random_separable(rng, int(rng.integers(1, 9)), int(rng.integers(1, 7)))
            dual, brute = solve_max_margin(ds), brute_force_max_margin(ds)
            assert np.linalg.norm(dual.w - brute.w) <= 1e-6 * (1 + np.linalg.norm(brute.w))
            assert dual.objective == pytest.approx(brute.objective, rel=1e-6)

    def test_brute_force_tie_break_is_lexicographic(self):
        # two identical points: supports {0} and {1} tie, {0} wins
        ds = make_dataset([[1.0, 0.0], [1.0, 0.0]], [1, 1])
        sol = brute_force_max_margin(ds)
        assert sol.lam.tolist() == [1.0, 0.0]


class TestInvariants:
    @pytest.mark.parametrize("n,d", [(1, 1), (4, 4), (10, 10), (7, 30)])
    def test_exact_orthogonality(self, n, d):
        rng = np.random.default_rng(n * 31 + d)
        X = np.zeros((n, d))
        X[np.arange(n), np.arange(n)] = rng.uniform(0.5, 3.0, n)
        y = rng.choice([-1, 1], n)
        sol = solve_max_margin(make_dataset(X, y))
        assert np.allclose(sol.lam, 1 / np.sum(X**2, axis=1), rtol=0, atol=1e-10)

    def test_dual_monotone(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            ds = random_separable(rng, 8, 5)
            trace = np.array(solve_max_margin(ds).dual_trace)
            assert np.all(np.diff(trace) >= -1e-12 * (1 + np.abs(trace[1:])))

    def test_scale_covariance(self):
        rng = np.random.default_rng(9)
        ds = random_separable(rng, 8, 6)
        c = 3.5
        base = solve_max_margin(ds)
        scaled_ds = make_dataset(c * ds.X, ds.y_obs)
        scaled = solve_max_margin(scaled_ds)
        assert np.allclose(scaled.w, base.w / c, rtol=1e-6, atol=1e-10)
        assert np.allclose(scaled.lam, base.lam / c**2, rtol=1e-6, atol=1e-10)
        probes = rng.standard_normal((50, 6))
        assert np.array_equal(np.sign(c * probes @ scaled.w), np.sign(probes @ base.w))

    def test_sandwich_on_nearly_orthogonal_data(self):
        checked = 0
        for seed in range(10):
            ds = sample(SgSpec(np.ones(40_000), 0.1), 8, seed)
            prof = orthogonality_profile(ds)
            if prof.p_star_value < 3:
                continue
            checked += 1
            sol = solve_max_margin(ds)
            lo, hi = lambda_bounds_linear(prof, prof.p_star)
            assert np.all((sol.lam >= lo) & (sol.lam <= hi))
            assert uniformity_ratio(sol.lam) <= tau_bound_linear(prof.p_star, prof.r_sq)
        assert checked >= 5


class TestClosedForms:
    def test_tau_bound_values(self):
        assert tau_bound_linear(1e12, 1.0) == pytest.approx(1 + 2e-12, rel=1e-15)
        assert tau_bound_linear(3, 1.0) == pytest.approx(3.0)
        assert tau_bound_linear(6, 2.0) == pytest.approx(2.4)

    @pytest.mark.parametrize("p,r_sq", [(2.9, 1.0), (3.0, 0.5)])
    def test_tau_bound_domain(self, p, r_sq):
        with pytest.raises(ValidationError):
            tau_bound_linear(p, r_sq)

    def test_lambda_bounds_values(self):
        unit = orthogonality_profile(np.array([[1.0, 0.0], [0.1, 0.99498743710662]]))
        lo, hi = lambda_bounds_linear(unit, 3)
        assert lo == pytest.approx(0.5) and hi == pytest.approx(1.5)
        prof = orthogonality_profile(np.array([[1.0, 0.0], [0.0, np.sqrt(2.0)]]))
        lo, hi = lambda_bounds_linear(prof, 6)
        assert lo == pytest.approx((1 - 1 / 11) / 2)
        assert hi == pytest.approx(1 / (1 - 1 / 12))

    def test_lambda_bounds_orthonormal_limit(self):
        prof = orthogonality_profile(np.eye(3))
        lo, hi = lambda_bounds_linear(prof, 1e15)
        assert lo == pytest.approx(1.0) and hi == pytest.approx(1.0)

    def test_lambda_bounds_requires_p3(self):
        with pytest.raises(ValidationError):
            lambda_bounds_linear(orthogonality_profile(np.eye(2)), 2.0)
