import math

import numpy as np
import pytest
from scipy.special import ndtr

from qsb.problems import (
    NoiseSpec,
    make_test_case,
    pdf_class,
    problem_summary,
    sample_response,
    sample_responses,
    snr_estimate,
    true_quantile,
    _two_slope_squared_cdf,
)

ALL_IDS = (1, 2, 3, 4)


class TestConstruction:
    def test_case_1(self):
        p = make_test_case(1)
        assert p.dim == 1
        np.testing.assert_array_equal(p.domain, [[-1, 1]])
        assert (p.noise.c_neg, p.noise.c_pos) == (1.0, 7.0)

    def test_case_2(self):
        p = make_test_case(2)
        assert p.dim == 2
        np.testing.assert_array_equal(p.domain, [[-5, 5], [-3, 3]])
        assert (p.noise.c_neg, p.noise.c_pos) == (1.0, 5.0)

    def test_case_3(self):
        p = make_test_case(3)
        assert p.dim == 1
        assert p.noise.family == "two-slope-normal-squared"
        assert (p.noise.c_neg, p.noise.c_pos) == (3.0, 6.0)
        assert p.noise_sign == -1.0

    def test_case_4(self):
        p = make_test_case(4)
        assert p.dim == 9
        assert p.noise.family == "lognormal"
        assert p.domain.shape == (9, 2)

    def test_case_5_unsupported(self):
        with pytest.raises(ValueError):
            make_test_case(5)

    def test_case_3_scale_positive_on_domain(self):
        # numerator cos(pi x/10)^3 and the absolute-value denominator are
        # both positive over [0, 4]
        p = make_test_case(3)
        x = np.linspace(0, 4, 4001).reshape(-1, 1)
        assert np.all(p.scale_part(x) > 0)

    def test_case_4_scale_positive_on_domain(self, rng):
        p = make_test_case(4)
        x = rng.uniform(p.domain[:, 0], p.domain[:, 1], size=(2000, 9))
        assert np.all(p.scale_part(x) > 0)


class TestSampler:
    def test_case_2_zero_scale_point(self, rng):
        p = make_test_case(2)
        draws = sample_responses(p, np.zeros((50, 2)) , rng)
        np.testing.assert_allclose(draws, 0.0, atol=1e-12)

    def test_rejects_outside_domain(self, rng):
        p = make_test_case(1)
        with pytest.raises(ValueError):
            sample_response(p, [1.5], rng)

    @pytest.mark.parametrize("pid", ALL_IDS)
    def test_mc_mean_matches_analytic(self, pid, rng):
        p = make_test_case(pid)
        x = ((p.domain[:, 0] + p.domain[:, 1]) / 2 + 0.1 * (p.domain[:, 1] - p.domain[:, 0]))
        x = x.reshape(1, -1)
        n = 200_000
        draws = sample_responses(p, np.repeat(x, n, axis=0), rng)
        nm, nv = p.noise.mean_var()
        want = p.mean_part(x)[0] + p.noise_sign * p.scale_part(x)[0] * nm
        se = math.sqrt(p.scale_part(x)[0] ** 2 * nv / n)
        assert abs(draws.mean() - want) <= 3 * se + 1e-12


class TestTrueQuantile:
    def test_case_2_zero_scale(self):
        p = make_test_case(2)
        for tau in (0.1, 0.5, 0.9):
            assert true_quantile(p, [[0.0, 0.0]], tau)[0] == pytest.approx(0.0)

    def test_case_1_median_where_scale_positive(self):
        p = make_test_case(1)
        x = np.array([[0.5]])
        assert true_quantile(p, x, 0.5)[0] == pytest.approx(5 * math.sin(4.0))

    def test_case_1_sign_flip_below_scale_root(self):
        # scale 0.2 + 3x^3 < 0 here, so the level flips to 1 - tau
        p = make_test_case(1)
        x = np.array([[-0.8]])
        s = 0.2 + 3 * (-0.8) ** 3
        assert s < 0
        for tau in (0.1, 0.9):
            want = 5 * math.sin(8 * -0.8) + s * p.noise.quantile(1 - tau)
            assert true_quantile(p, x, tau)[0] == pytest.approx(want)

    def test_squared_noise_cdf_inversion(self):
        spec = NoiseSpec("two-slope-normal-squared", 3.0, 6.0)
        for p_level in (0.05, 0.3, 0.5, 0.9, 0.99):
            t = spec.quantile(p_level)
            assert _two_slope_squared_cdf(t, 3.0, 6.0) == pytest.approx(
                p_level, abs=1e-8
            )

    def test_two_slope_quantile_formula(self):
        spec = NoiseSpec("two-slope-normal", 1.0, 7.0)
        # below the median the negative slope applies, above it the positive
        from scipy.special import ndtri

        assert spec.quantile(0.3) == pytest.approx(ndtri(0.3))
        assert spec.quantile(0.9) == pytest.approx(7 * ndtri(0.9))

    @pytest.mark.parametrize("pid", ALL_IDS)
    def test_monotone_in_tau(self, pid, rng):
        p = make_test_case(pid)
        x = rng.uniform(p.domain[:, 0], p.domain[:, 1], size=(10, p.dim))
        taus = np.arange(0.05, 0.96, 0.05)
        qs = np.column_stack([true_quantile(p, x, t) for t in taus])
        assert np.all(np.diff(qs, axis=1) >= -1e-9)

    @pytest.mark.parametrize("pid", ALL_IDS)
    def test_mc_coverage(self, pid, rng):
        # fraction of draws below the true quantile equals tau
        p = make_test_case(pid)
        n = 100_000
        for _ in range(3):
            x = rng.uniform(p.domain[:, 0], p.domain[:, 1], size=(1, p.dim))
            draws = sample_responses(p, np.repeat(x, n, axis=0), rng)
            for tau in (0.1, 0.5, 0.9):
                q = true_quantile(p, x, tau)[0]
                frac = float(np.mean(draws <= q))
                se = math.sqrt(tau * (1 - tau) / n)
                assert abs(frac - tau) <= 4 * se, (pid, tau, frac)


class TestSnr:
    def test_case_1_centered_convention(self, rng):
        est = snr_estimate(make_test_case(1), 200_000, rng, convention="mean-part")
        assert est.value == pytest.approx(0.5, rel=0.1)
        assert est.standard_error > 0

    def test_case_1_literal_definition_differs(self, rng):
        est = snr_estimate(make_test_case(1), 200_000, rng)
        assert est.value == pytest.approx(0.96, rel=0.15)

    def test_case_2_literal_positive_centered_zero(self, rng):
        lit = snr_estimate(make_test_case(2), 100_000, rng)
        cen = snr_estimate(make_test_case(2), 100_000, rng, convention="mean-part")
        assert lit.value > 0.01
        assert cen.value == pytest.approx(0.0, abs=1e-12)

    def test_budget_validation(self, rng):
        with pytest.raises(ValueError):
            snr_estimate(make_test_case(1), 100, rng)


def test_pdf_class_table():
    assert pdf_class(2, 0.5) == "large"
    assert pdf_class(4, 0.9) == "very small"
    assert pdf_class(1, 0.1) == "variable"
    with pytest.raises(ValueError):
        pdf_class(1, 0.42)


def test_problem_summary_rows():
    rows = problem_summary()
    assert [r["id"] for r in rows] == [1, 2, 3, 4]
    assert rows[3]["dim"] == 9
    assert rows[0]["snr_class"] == "small"
    assert rows[3]["snr_class"] == "large"
