import math

import numpy as np
import pytest

from qsb.core import (
    DegenerateTruthError,
    e_cq,
    e_l2,
    empirical_quantile,
    order_index,
    pinball_loss,
    rank_methods,
    smoothed_pinball,
    smoothed_pinball_grad,
)


class TestPinball:
    def test_zero_residual(self):
        assert pinball_loss(0.9, 0.0) == 0.0

    def test_negative_residual(self):
        # (0.1 - 1) * (-2)
        assert pinball_loss(0.1, -2.0) == pytest.approx(1.8)

    def test_positive_residual(self):
        assert pinball_loss(0.5, 4.0) == pytest.approx(2.0)

    def test_nonnegative_and_zero_only_at_zero(self, rng):
        xi = rng.normal(size=500)
        vals = pinball_loss(0.3, xi)
        assert np.all(vals >= 0)
        assert np.all((vals == 0) == (xi == 0))

    def test_convexity_on_random_pairs(self, rng):
        for _ in range(200):
            tau = rng.uniform(0.05, 0.95)
            a, b = rng.normal(size=2) * 10
            mid = pinball_loss(tau, (a + b) / 2)
            assert mid <= (pinball_loss(tau, a) + pinball_loss(tau, b)) / 2 + 1e-12

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            pinball_loss(0.5, np.nan)
        with pytest.raises(ValueError):
            pinball_loss(0.5, np.inf)

    @pytest.mark.parametrize("tau", [0.0, 1.0, -0.2, 1.5])
    def test_rejects_bad_tau(self, tau):
        with pytest.raises(ValueError):
            pinball_loss(tau, 1.0)


class TestSmoothedPinball:
    def test_zero_residual(self):
        assert smoothed_pinball(0.5, 1.0, 0.0) == 0.0

    def test_quadratic_zone(self):
        # h = 0.5^2/2 = 0.125, weighted by tau = 0.1
        assert smoothed_pinball(0.1, 1.0, 0.5) == pytest.approx(0.0125)

    def test_linear_zone(self):
        # h = 2 - 0.5 = 1.5, weighted by tau = 0.1
        assert smoothed_pinball(0.1, 1.0, 2.0) == pytest.approx(0.15)

    def test_rejects_nonpositive_eta(self):
        with pytest.raises(ValueError):
            smoothed_pinball(0.5, 0.0, 1.0)
        with pytest.raises(ValueError):
            smoothed_pinball(0.5, -1.0, 1.0)

    @pytest.mark.parametrize("tau", [0.1, 0.5, 0.9])
    @pytest.mark.parametrize("eta", [1.0, 0.1, 1e-3])
    def test_uniform_distance_to_pinball(self, tau, eta):
        xi = np.linspace(-5, 5, 1001)
        gap = np.abs(smoothed_pinball(tau, eta, xi) - pinball_loss(tau, xi))
        assert gap.max() <= eta / 2 * max(tau, 1 - tau) + 1e-15

    def test_nonnegative(self, rng):
        xi = rng.normal(size=300)
        assert np.all(smoothed_pinball(0.2, 0.5, xi) >= 0)

    def test_gradient_matches_finite_differences(self, rng):
        h = 1e-7
        for _ in range(100):
            tau = rng.uniform(0.05, 0.95)
            eta = rng.uniform(0.05, 2.0)
            xi = rng.normal() * 3
            fd = (
                smoothed_pinball(tau, eta, xi + h) - smoothed_pinball(tau, eta, xi - h)
            ) / (2 * h)
            assert smoothed_pinball_grad(tau, eta, xi) == pytest.approx(fd, abs=1e-6)


class TestEmpiricalQuantile:
    def test_single_element(self):
        for tau in (0.01, 0.5, 0.99):
            assert empirical_quantile([5.0], tau) == 5.0

    def test_second_smallest(self):
        assert empirical_quantile([3, 1, 2], 0.5) == 2

    def test_minimum(self):
        assert empirical_quantile([3, 1, 2], 1 / 3) == 1

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            empirical_quantile([], 0.5)

    def test_float_guard_on_exact_products(self):
        # 80 * 0.9 must select the 72nd order statistic
        assert order_index(80, 0.9) == 72
        assert empirical_quantile(np.arange(1.0, 81.0), 0.9) == 72.0

    def test_minimizes_pinball_risk_over_sample(self, rng):
        # the order statistic is a minimizer of the empirical pinball risk
        # among the sample values themselves (brute force)
        for _ in range(50):
            n = int(rng.integers(1, 51))
            y = rng.normal(size=n) * rng.uniform(0.5, 5)
            tau = rng.uniform(0.05, 0.95)
            q = empirical_quantile(y, tau)
            risk_q = pinball_loss(tau, y - q).mean()
            best = min(pinball_loss(tau, y - c).mean() for c in y)
            assert risk_q <= best + 1e-12


class TestErrors:
    def test_e_l2_perfect(self):
        assert e_l2([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_e_l2_values(self):
        assert e_l2([1, 2], [0, 2]) == pytest.approx(1.0)
        assert e_l2([0, 0], [3, 4]) == pytest.approx(25.0)

    def test_e_l2_length_mismatch(self):
        with pytest.raises(ValueError):
            e_l2([1, 2], [1, 2, 3])

    def test_e_cq_constant_model_is_100(self, rng):
        q_true = rng.normal(size=20)
        c = 0.5
        q_hat = np.full(20, c)
        assert e_cq(q_hat, q_true, c) == pytest.approx(100.0)

    def test_e_cq_perfect_predictor(self, rng):
        q_true = rng.normal(size=20)
        assert e_cq(q_true, q_true, 0.3) == 0.0

    def test_e_cq_arithmetic(self):
        # numerator 1, denominator 4 -> 50%
        q_true = np.array([0.0, 0.0])
        q_hat = np.array([1.0, 0.0])
        const = math.sqrt(2.0)  # e_l2(const, 0) = 4
        assert e_cq(q_hat, q_true, const) == pytest.approx(50.0)

    def test_e_cq_degenerate_truth(self):
        with pytest.raises(DegenerateTruthError):
            e_cq([1.0, 1.0], [2.0, 2.0], 2.0)


class TestRanks:
    def test_sorted_input(self):
        assert rank_methods({"A": 1.0, "B": 2.0}) == {"A": 1, "B": 2}

    def test_unsorted_input(self):
        assert rank_methods({"A": 2.0, "B": 1.0, "C": 3.0}) == {"A": 2, "B": 1, "C": 3}

    def test_tie_break_by_id(self):
        assert rank_methods({"B": 1.0, "A": 1.0}) == {"A": 1, "B": 2}

    def test_ranks_are_permutation(self, rng):
        for _ in range(25):
            errs = {f"m{i}": float(rng.integers(0, 4)) for i in range(6)}
            ranks = rank_methods(errs)
            assert sorted(ranks.values()) == list(range(1, 7))

    def test_needs_two_methods(self):
        with pytest.raises(ValueError):
            rank_methods({"A": 1.0})
