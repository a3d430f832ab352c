import numpy as np
import pytest

from qlbs.numerics import (
    RankDeficientError,
    RidgeProblem,
    cross_sectional_stats,
    ridge_solve,
    scaled_regularizer,
    solve_normal_equations,
)

from conftest import (
    GOLDEN_PHI2,
    GOLDEN_PI_HAT_T,
    GOLDEN_PI_T,
    GOLDEN_PRICES,
    GOLDEN_Q_T,
    GOLDEN_REWARDS_2,
    GOLDEN_RIDGE,
    GOLDEN_VALUE_COEFFS_2,
)


class TestRidgeSolve:
    def test_identity_design(self):
        x = ridge_solve(RidgeProblem(np.eye(3), np.array([1.0, 2.0, 3.0])))
        assert np.allclose(x, [1.0, 2.0, 3.0], atol=1e-12)

    def test_golden_value_system(self):
        # The published value-coefficient solve at the third step: the
        # published feature matrix against reward + discounted next value,
        # with the reference ridge weight.
        gamma = np.exp(-0.01)
        target = GOLDEN_REWARDS_2 + gamma * GOLDEN_Q_T
        coeffs = ridge_solve(RidgeProblem(GOLDEN_PHI2, target, GOLDEN_RIDGE))
        assert np.allclose(coeffs, GOLDEN_VALUE_COEFFS_2, atol=0.05)

    def test_matches_dense_inverse_oracle(self):
        rng = np.random.default_rng(7)
        design = rng.normal(size=(50, 6))
        target = rng.normal(size=50)
        x = ridge_solve(RidgeProblem(design, target, 0.0))
        oracle = np.linalg.inv(design.T @ design) @ design.T @ target
        assert np.max(np.abs(x - oracle)) <= 1e-8

    def test_residual_orthogonality(self):
        rng = np.random.default_rng(11)
        design = rng.normal(size=(40, 5))
        target = rng.normal(size=40)
        for reg in (0.0, 1e-4, 1e-1):
            x = ridge_solve(RidgeProblem(design, target, reg))
            gradient = design.T @ (target - design @ x) - reg * x
            assert np.max(np.abs(gradient)) <= 1e-8 * np.linalg.norm(target)

    def test_shrinkage_monotone(self):
        rng = np.random.default_rng(3)
        design = rng.normal(size=(30, 4))
        target = rng.normal(size=30)
        norms = [
            np.linalg.norm(ridge_solve(RidgeProblem(design, target, reg)))
            for reg in (0.0, 1e-3, 1e-1, 1.0, 10.0)
        ]
        assert all(a > b for a, b in zip(norms, norms[1:]))

    def test_rank_deficiency(self):
        design = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        target = np.array([1.0, 2.0, 3.0])
        with pytest.raises(RankDeficientError):
            ridge_solve(RidgeProblem(design, target, 0.0))
        x = ridge_solve(RidgeProblem(design, target, 1e-8))
        assert np.all(np.isfinite(x))

    def test_validation(self):
        with pytest.raises(ValueError):
            RidgeProblem(np.eye(2), np.array([1.0, 2.0]), -1.0)
        with pytest.raises(ValueError):
            RidgeProblem(np.eye(2), np.array([1.0, 2.0, 3.0]))
        with pytest.raises(ValueError):
            RidgeProblem(np.array([[1.0, np.nan]]), np.array([1.0]))

    def test_asymmetric_input_is_symmetrized(self):
        gram = np.array([[2.0, 0.41], [0.42, 1.0]])
        rhs = np.array([1.0, 1.0])
        x = solve_normal_equations(gram, rhs)
        sym = 0.5 * (gram + gram.T)
        assert np.allclose(sym @ x, rhs, atol=1e-12)

    def test_scaled_regularizer(self):
        gram = np.diag([1.0, 2.0, 3.0])
        assert scaled_regularizer(gram, 1e-6) == pytest.approx(2e-6)


class TestCrossSectionalStats:
    def test_golden_terminal_portfolio(self):
        mean, var = cross_sectional_stats(GOLDEN_PI_T)
        assert mean == pytest.approx(4.55, abs=0.01)
        assert np.allclose(GOLDEN_PI_T - mean, GOLDEN_PI_HAT_T, atol=0.01)

    def test_population_variance_reproduces_golden_values(self):
        # The published terminal values pin the variance convention:
        # population variance rounds to them, the sample variance does not.
        _, var_pop = cross_sectional_stats(GOLDEN_PI_T)
        lam = 1e-3
        assert np.array_equal(np.round(-GOLDEN_PI_T - lam * var_pop, 2), GOLDEN_Q_T)
        var_sample = np.var(GOLDEN_PI_T, ddof=1)
        assert not np.array_equal(
            np.round(-GOLDEN_PI_T - lam * var_sample, 2), GOLDEN_Q_T)

    def test_constant_vector(self):
        mean, var = cross_sectional_stats(np.full(9, 3.25))
        assert mean == pytest.approx(3.25)
        assert var == 0.0

    def test_demeaned_sum_is_zero(self):
        rng = np.random.default_rng(23)
        values = rng.normal(size=1000) * 40 + 7
        mean, _ = cross_sectional_stats(values)
        assert abs(np.sum(values - mean)) <= 1e-12 * max(np.abs(values).sum(), 1.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            cross_sectional_stats(np.array([]))


class TestGoldenHedgeSystem:
    def test_weighted_normal_equations(self, golden_paths):
        # Hedge-coefficient system at the third step, built from the
        # published feature matrix and exact increments.
        growth = np.exp(0.03 / 3.0)
        delta_s = GOLDEN_PRICES[:, 3] - growth * GOLDEN_PRICES[:, 2]
        delta_s_hat = delta_s - delta_s.mean()
        payoff = np.maximum(100.0 - GOLDEN_PRICES[:, 3], 0.0)
        pi_hat = payoff - payoff.mean()

        weighted = GOLDEN_PHI2 * delta_s_hat[:, np.newaxis]
        gram = weighted.T @ weighted
        rhs = GOLDEN_PHI2.T @ (pi_hat * delta_s_hat)
        coeffs = solve_normal_equations(gram, rhs, GOLDEN_RIDGE)
        assert np.allclose(coeffs, [-3.05, 11.37, 8.2], atol=0.05)
