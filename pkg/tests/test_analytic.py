import math

import numpy as np
import pytest
from scipy.integrate import quad

from nvmdtd.analytic import (
    Method,
    ber_derivative,
    ber_fixed_offset,
    ber_variable_offset,
    ber_variable_offset_derivative,
    optimal_threshold_bisection,
    optimal_threshold_closed_form,
    optimal_threshold_empirical,
    q_function,
)
from nvmdtd.channel import ChannelParams, NoiseModel, sample_block_matrix
from nvmdtd.detectors import threshold_detect
from nvmdtd.errors import ParameterError, UnsupportedModelError


def golden_min(f, a, c, tol=1e-11):
    """Independent golden-section minimizer used as the closed-form oracle."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1, x2 = c - invphi * (c - a), a + invphi * (c - a)
    f1, f2 = f(x1), f(x2)
    while c - a > tol:
        if f1 < f2:
            c, x2, f2 = x2, x1, f1
            x1 = c - invphi * (c - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (c - a)
            f2 = f(x2)
    return 0.5 * (a + c)


class TestQFunction:
    def test_zero(self):
        assert q_function(0.0) == pytest.approx(0.5, abs=1e-15)

    def test_tail_complement(self):
        for t in np.linspace(-6, 6, 25):
            assert q_function(t) + q_function(-t) == pytest.approx(1.0, abs=1e-14)

    def test_against_numerical_integration(self):
        # Oracle: direct quadrature of the standard normal density.
        pdf = lambda u: math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)
        for t in (0.5, 1.0, 2.0, 3.0, 5.0):
            ref, _ = quad(pdf, t, 40.0)
            assert q_function(t) == pytest.approx(ref, rel=1e-10)
        assert q_function(3.0) == pytest.approx(1.3498980316301e-3, rel=1e-10)


class TestBerFixedOffset:
    def test_symmetric_midpoint(self):
        p = ChannelParams(1.0, 2.0, 0.1, 0.1)
        assert ber_fixed_offset(1.5, p, 0.0) == pytest.approx(float(q_function(0.5 / 0.1)), rel=1e-12)

    def test_threshold_far_left(self):
        p = ChannelParams.from_ratio(0.05)
        assert ber_fixed_offset(-50.0, p, 0.0) == pytest.approx(0.5, abs=1e-12)

    def test_monte_carlo_agreement(self):
        p = ChannelParams.from_ratio(0.12)
        res = optimal_threshold_closed_form(p, b=0.0)
        x, y = sample_block_matrix(p, 71, 15_000, seed=314)
        decided = threshold_detect(y, res.r_th)
        ber_mc = np.count_nonzero(decided != x) / x.size
        sigma = math.sqrt(res.ber * (1 - res.ber) / x.size)
        assert abs(ber_mc - res.ber) <= 3 * sigma

    def test_non_gaussian_rejected(self):
        p = ChannelParams.from_ratio(0.05, noise_model=NoiseModel.CENTERED_BETA)
        with pytest.raises(UnsupportedModelError):
            ber_fixed_offset(1.5, p, 0.0)


class TestBerDerivative:
    def test_zero_at_closed_form_root(self):
        p = ChannelParams(1.0, 2.0, 0.05, 0.10)
        res = optimal_threshold_closed_form(p, b=0.0)
        assert abs(ber_derivative(res.r_th, p, 0.0)) < 1e-10

    def test_matches_finite_differences(self):
        # The difference quotient carries cancellation noise of roughly
        # eps * BER / h ~ 1e-10, so the relative check only binds where the
        # derivative is comfortably above that floor.
        rng = np.random.default_rng(5)
        h = 1e-6
        for _ in range(100):
            ratio = rng.uniform(0.03, 0.15)
            b = rng.uniform(-0.3, 0.1)
            p = ChannelParams.from_ratio(ratio)
            r = rng.uniform(1.05, 1.9)
            fd = (ber_fixed_offset(r + h, p, b) - ber_fixed_offset(r - h, p, b)) / (2 * h)
            an = ber_derivative(r, p, b)
            assert an == pytest.approx(fd, rel=1e-6, abs=2e-9)

    def test_strongly_negative_near_mu0(self):
        p = ChannelParams(1.0, 2.0, 0.02, 0.04)
        assert ber_derivative(1.0, p, 0.0) < -1.0


class TestClosedForm:
    def test_equal_sigma_midpoint(self):
        p = ChannelParams(1.0, 2.0, 0.07, 0.07)
        assert optimal_threshold_closed_form(p, b=0.0).r_th == pytest.approx(1.5, abs=1e-12)

    def test_against_golden_section(self):
        p = ChannelParams(1.0, 2.0, 0.05, 0.10)
        res = optimal_threshold_closed_form(p, b=0.0)
        oracle = golden_min(lambda r: ber_fixed_offset(r, p, 0.0), 1.0, 2.0)
        assert res.r_th == pytest.approx(oracle, abs=1e-6)
        assert res.r_th == pytest.approx(1.3368, abs=5e-5)
        assert res.method is Method.CLOSED_FORM

    def test_offset_is_mean_shift(self):
        p = ChannelParams(1.0, 2.0, 0.05, 0.10)
        shifted = ChannelParams(1.0, 1.8, 0.05, 0.10)
        a = optimal_threshold_closed_form(p, b=-0.2)
        b = optimal_threshold_closed_form(shifted, b=0.0)
        assert a.r_th == pytest.approx(b.r_th, abs=1e-12)

    def test_dominates_grid(self):
        p = ChannelParams.from_ratio(0.08, mu_b=-0.2, sigma_b_over_mu1=0.04)
        res = optimal_threshold_closed_form(p, b=p.offset_mu_b)
        grid = np.linspace(p.mu0, p.mu1 + abs(p.offset_mu_b) + 4 * p.offset_sigma_b, 10_000)
        best = min(ber_fixed_offset(float(r), p, p.offset_mu_b) for r in grid)
        assert res.ber <= best + 1e-15


class TestVariableOffset:
    def test_degenerate_sigma_b(self):
        p = ChannelParams.from_ratio(0.05, mu_b=-0.2, sigma_b_over_mu1=0.0)
        for r in (1.2, 1.4, 1.6):
            assert ber_variable_offset(r, p) == ber_fixed_offset(r, p, -0.2)

    def test_gaussian_convolution_identity(self, offset_channel):
        p = offset_channel
        s_eff = math.sqrt(p.sigma1 ** 2 + p.offset_sigma_b ** 2)
        for r in np.linspace(1.05, 1.95, 19):
            exact = 0.5 * (
                1.0
                + q_function((r - p.mu0) / p.sigma0)
                - q_function((r - p.mu1 - p.offset_mu_b) / s_eff)
            )
            assert ber_variable_offset(float(r), p) == pytest.approx(float(exact), abs=1e-10)

    def test_local_minimality(self, offset_channel):
        opt = optimal_threshold_bisection(offset_channel)
        assert opt.ber < ber_variable_offset(opt.r_th - 0.05, offset_channel)
        assert opt.ber < ber_variable_offset(opt.r_th + 0.05, offset_channel)

    def test_quadrature_node_convergence(self, offset_channel):
        for r in np.linspace(1.0, 2.0, 21):
            a = ber_variable_offset(float(r), offset_channel, nodes=64)
            b = ber_variable_offset(float(r), offset_channel, nodes=128)
            assert abs(a - b) < 1e-12


class TestBisection:
    def test_matches_closed_form_when_degenerate(self):
        p = ChannelParams.from_ratio(0.07, mu_b=-0.15, sigma_b_over_mu1=0.0)
        bi = optimal_threshold_bisection(p)
        cf = optimal_threshold_closed_form(p, b=-0.15)
        assert bi.r_th == pytest.approx(cf.r_th, abs=1e-8)

    def test_gaussian_reduction(self, offset_channel):
        p = offset_channel
        bi = optimal_threshold_bisection(p)
        eff = ChannelParams(
            p.mu0, p.mu1 + p.offset_mu_b, p.sigma0,
            math.sqrt(p.sigma1 ** 2 + p.offset_sigma_b ** 2),
        )
        cf = optimal_threshold_closed_form(eff, b=0.0)
        assert bi.r_th == pytest.approx(cf.r_th, abs=1e-8)
        assert bi.method is Method.BISECTION

    def test_grid_oracle(self, offset_channel):
        # Two-stage grid: coarse pass over the bracket, then a fine pass
        # around the coarse minimum; the flat quadratic bottom makes a
        # single 1e4-point grid resolve only ~1e-9 in BER.
        p = offset_channel
        bi = optimal_threshold_bisection(p)
        grid = np.linspace(p.mu0, p.mu1, 10_000)
        vals = np.array([ber_variable_offset(float(r), p) for r in grid])
        k = int(np.argmin(vals))
        fine = np.linspace(grid[max(0, k - 1)], grid[min(len(grid) - 1, k + 1)], 10_000)
        best = min(ber_variable_offset(float(r), p) for r in fine)
        assert abs(bi.ber - best) < 1e-12

    def test_derivative_root(self, offset_channel):
        opt = optimal_threshold_bisection(offset_channel)
        assert abs(ber_variable_offset_derivative(opt.r_th, offset_channel)) < 1e-9


class TestEmpirical:
    def test_gaussian_consistency(self, active_offset_channel):
        emp = optimal_threshold_empirical(active_offset_channel, 100_000, seed=987)
        bi = optimal_threshold_bisection(active_offset_channel)
        assert abs(emp.r_th - bi.r_th) < 0.01
        assert emp.method is Method.EMPIRICAL_SEARCH
        assert emp.warning is None

    def test_noise_free_limit(self):
        p = ChannelParams(1.0, 2.0, 1e-9, 2e-9)
        emp = optimal_threshold_empirical(p, 200, seed=5)
        assert 1.0 < emp.r_th < 2.0
        assert emp.ber == 0.0

    def test_small_sample_warning(self):
        p = ChannelParams.from_ratio(0.10)
        emp = optimal_threshold_empirical(p, 50, seed=5)
        assert emp.warning is not None

    def test_beta_dominates_gaussian_threshold_on_same_sample(self):
        p = ChannelParams.from_ratio(0.10, mu_b=-0.2, sigma_b_over_mu1=0.07,
                                     noise_model=NoiseModel.CENTERED_BETA)
        gauss_view = ChannelParams(p.mu0, p.mu1, p.sigma0, p.sigma1,
                                   p.offset_mu_b, p.offset_sigma_b)
        nblocks, seed = 20_000, 77
        emp = optimal_threshold_empirical(p, nblocks, seed=seed)
        curve2 = optimal_threshold_closed_form(gauss_view, b=p.offset_mu_b)
        x, y = sample_block_matrix(p, 71, nblocks, seed=seed)
        errors_gauss = int(np.count_nonzero(threshold_detect(y, curve2.r_th) != x))
        assert emp.ber <= errors_gauss / x.size

    def test_rejects_zero_blocks(self):
        with pytest.raises(ParameterError):
            optimal_threshold_empirical(ChannelParams.from_ratio(0.05), 0, seed=1)


class TestMonotoneDegradation:
    def test_min_ber_non_decreasing_in_ratio(self):
        ratios = np.linspace(0.04, 0.13, 10)
        bers = [
            optimal_threshold_bisection(
                ChannelParams.from_ratio(float(r), mu_b=-0.2, sigma_b_over_mu1=0.04)
            ).ber
            for r in ratios
        ]
        assert all(b2 >= b1 - 1e-15 for b1, b2 in zip(bers, bers[1:]))
