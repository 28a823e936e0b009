import numpy as np
import pytest

from darcat.core import MISSING, CatSeries, StateSpace
from darcat.dar import DarModel, MissingDarModel, simulate, simulate_with_missing
from darcat.estimate import (
    AllMissing,
    InsufficientTransitions,
    alpha_ls_from_matrix,
    alpha_mle_equation,
    estimate_alpha_ls,
    estimate_alpha_mle,
    estimate_alpha_mle_gapped,
    estimate_beta,
    estimate_pi,
    pi_covariance_limit,
    pi_hat_covariance,
    pi_hat_variance,
    pi_variance_limit,
    vn,
)

K2 = StateSpace.from_k(2)


def series(obs, k=2):
    return CatSeries(StateSpace.from_k(k), tuple(obs))


def vn_brute(alpha, n):
    return sum((n - h) * alpha**h for h in range(1, n + 1))


class TestPi:
    def test_plain_frequencies(self):
        est = estimate_pi(series([1, 1, 2, 2]))
        assert np.allclose(est.pi_hat, [0.5, 0.5])
        assert est.n_obs == 4

    def test_missing_skipped(self):
        est = estimate_pi(series([1, MISSING, 1, 2]))
        assert np.allclose(est.pi_hat, [2 / 3, 1 / 3])
        assert est.n_obs == 3

    def test_all_missing(self):
        with pytest.raises(AllMissing):
            estimate_pi(series([MISSING, MISSING]))

    def test_simulated_marginal(self):
        # the 2-state asymmetric configuration at n=500 recovers (1/3, 2/3)
        s = simulate(DarModel.from_pi(0.5, [1 / 3, 2 / 3]), 500, seed=123)
        est = estimate_pi(s)
        assert np.allclose(est.pi_hat, [1 / 3, 2 / 3], atol=0.05)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(3)
        obs = rng.integers(1, 4, 100)
        est = estimate_pi(series(obs, k=3))
        swap = {1: 3, 2: 1, 3: 2}
        est_swapped = estimate_pi(series([swap[v] for v in obs], k=3))
        assert np.allclose(est.pi_hat, est_swapped.pi_hat[[2, 0, 1]])

    def test_with_alpha_fills_scale(self):
        est = estimate_pi(series([1, 1, 2, 2])).with_alpha(0.5)
        assert np.allclose(est.var_asymptotic, 3.0 * 0.25)


class TestVn:
    def test_zero_alpha(self):
        assert vn(0.0, 17) == 0.0

    def test_hand_sum(self):
        assert vn(0.5, 3) == pytest.approx(1.25, abs=1e-15)

    def test_closed_form_matches_brute_force(self):
        for alpha in np.arange(0.0, 0.95, 0.1):
            for n in range(1, 101):
                expected = vn_brute(alpha, n)
                assert vn(float(alpha), n) == pytest.approx(expected, abs=1e-9 * max(1.0, expected))

    def test_near_one_guard(self):
        alpha = 1 - 1e-8
        assert vn(alpha, 50) == pytest.approx(vn_brute(alpha, 50), rel=1e-12)


class TestVariance:
    def test_binomial_at_alpha_zero(self):
        assert pi_hat_variance(0.3, 0.0, 50) == pytest.approx(0.3 * 0.7 / 50, abs=1e-15)

    def test_scaled_limit(self):
        assert pi_variance_limit(0.5, 0.5) == pytest.approx(0.75)
        n = 10_000
        assert n * pi_hat_variance(0.5, 0.5, n) == pytest.approx(0.75, abs=1e-2)

    def test_covariance_sign_and_limit(self):
        assert pi_hat_covariance(0.3, 0.4, 0.5, 100) < 0
        assert pi_covariance_limit(0.3, 0.4, 0.5) == pytest.approx(-2 * 0.5 / 0.5 * 0.12)
        n = 10_000
        assert n * pi_hat_covariance(0.3, 0.4, 0.5, n) == pytest.approx(
            pi_covariance_limit(0.3, 0.4, 0.5), abs=1e-2
        )


class TestAlphaMle:
    def test_expected_count_fixed_point(self):
        # diagonal counts at their expectation solve the score exactly
        rng = np.random.default_rng(7)
        for _ in range(20):
            k = int(rng.integers(2, 7))
            pi = rng.dirichlet(np.ones(k))
            alpha = float(rng.uniform(0, 0.99))
            n = 1000
            diag = n * pi * (alpha + (1 - alpha) * pi)
            assert alpha_mle_equation(alpha, diag, pi, n) == pytest.approx(0.0, abs=1e-12)

    def test_score_is_decreasing(self):
        s = simulate(DarModel.from_pi(0.4, [0.3, 0.3, 0.4]), 300, seed=2)
        pi_hat = estimate_pi(s).pi_hat
        x = s.values()
        diag = np.bincount(x[:-1][x[:-1] == x[1:]] - 1, minlength=3)
        grid = [alpha_mle_equation(a, diag, pi_hat, x.size - 1) for a in np.linspace(0, 0.999, 200)]
        assert all(b < a for a, b in zip(grid, grid[1:]))

    def test_alternating_series_hits_lower_boundary(self):
        s = series([1, 2] * 10)
        est = estimate_alpha_mle(s, estimate_pi(s).pi_hat)
        assert est.alpha_hat == 0.0 and not est.converged

    def test_constant_series_hits_upper_boundary(self):
        s = series([2] * 12, k=2)
        est = estimate_alpha_mle(s, estimate_pi(s).pi_hat)
        assert est.alpha_hat == 1.0 and not est.converged

    def test_no_pairs(self):
        with pytest.raises(InsufficientTransitions):
            estimate_alpha_mle(series([1, MISSING, 2]), np.array([0.5, 0.5]))

    def test_table_cell_mean(self):
        # half/half marginal, alpha = 0.5, n = 500, 100 replicates
        model = DarModel.from_pi(0.5, [0.5, 0.5])
        values = []
        for r in range(100):
            s = simulate(model, 500, seed=9000 + r)
            est = estimate_alpha_mle(s, estimate_pi(s).pi_hat)
            if est.converged:
                values.append(est.alpha_hat)
        assert len(values) == 100
        assert np.mean(values) == pytest.approx(0.494, abs=0.02)


class TestAlphaLs:
    def test_exact_recovery(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            k = int(rng.integers(2, 7))
            pi = rng.dirichlet(np.ones(k))
            alpha = float(rng.uniform(0, 0.999))
            p = alpha * np.eye(k) + (1 - alpha) * np.tile(pi, (k, 1))
            assert alpha_ls_from_matrix(p, pi) == pytest.approx(alpha, abs=1e-12)

    def test_out_of_interval_reported_raw(self):
        s = series([1, 2] * 20)  # strong anti-persistence
        est = estimate_alpha_ls(s, estimate_pi(s).pi_hat)
        assert est.alpha_hat < 0.0 and not est.converged

    def test_table_cell_means(self):
        model = DarModel.from_pi(0.5, [0.5, 0.5])
        values = []
        for r in range(100):
            s = simulate(model, 500, seed=9000 + r)
            est = estimate_alpha_ls(s, estimate_pi(s).pi_hat)
            if est.converged:
                values.append(est.alpha_hat)
        assert np.mean(values) == pytest.approx(0.497, abs=0.02)
        # 3-state configuration at strong persistence
        model3 = DarModel.from_pi(0.9, [0.25, 0.5, 0.25])
        values3 = []
        for r in range(100):
            s = simulate(model3, 500, seed=9500 + r)
            est = estimate_alpha_ls(s, estimate_pi(s).pi_hat)
            if est.converged:
                values3.append(est.alpha_hat)
        assert np.mean(values3) == pytest.approx(0.892, abs=0.02)


class TestAlphaGapped:
    def test_reduces_to_plain_mle_on_complete_series(self):
        s = simulate(DarModel.from_pi(0.5, [0.5, 0.5]), 1000, seed=3)
        plain = estimate_alpha_mle(s, estimate_pi(s).pi_hat)
        gapped = estimate_alpha_mle_gapped(s)
        assert gapped.alpha_hat == pytest.approx(plain.alpha_hat, abs=1e-6)

    def test_consistency_with_missing(self):
        mm = MissingDarModel(DarModel.from_pi(0.5, [0.5, 0.5]), 0.3)
        s = simulate_with_missing(mm, 2000, seed=5)
        est = estimate_alpha_mle_gapped(s)
        assert est.alpha_hat == pytest.approx(0.5, abs=0.1)

    def test_alternating_with_gaps_hits_zero(self):
        s = series([1, MISSING, 2, MISSING, 1, MISSING, 2, 1, 2])
        est = estimate_alpha_mle_gapped(s)
        assert est.alpha_hat == pytest.approx(0.0, abs=1e-6)
        assert not est.converged

    def test_no_observed_pair(self):
        with pytest.raises(InsufficientTransitions):
            estimate_alpha_mle_gapped(series([1, MISSING]))


class TestBeta:
    def test_complete_series(self):
        assert estimate_beta(series([1, 2, 1])) == 0.0

    def test_counts_all_positions(self):
        assert estimate_beta(series([1, MISSING, MISSING, 1])) == 0.5

    def test_field_survey_convention(self):
        # 31 annual positions with 24 observed: the observed fraction is the
        # figure reported in field tables, rounding to 0.774
        obs = [1] * 24 + [MISSING] * 7
        s = series(obs)
        beta = estimate_beta(s)
        assert beta == pytest.approx(7 / 31)
        assert round(1 - beta, 3) == 0.774
