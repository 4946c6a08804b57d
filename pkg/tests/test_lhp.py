import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from greenbrown.copula import LoanClassParams
from greenbrown.dist import delta_from_shape, norm_cdf, norm_quantile
from greenbrown.errors import DomainError, NonInvertibleError
from greenbrown.lhp import (
    LimitModel,
    conditional_loss,
    general_mix_cdf,
    invert_v,
    mix_cdf,
    mix_density,
    mix_loss,
    mix_slope,
    mix_var,
    single_class_density,
)

SCENARIOS = {
    1: (0.028, 0.028, 0.10, 0.15),
    2: (0.028, 0.028, 0.15, 0.10),
    3: (0.020, 0.028, 0.10, 0.10),
    4: (0.030, 0.028, 0.10, 0.10),
}
SHAPES = (-0.8, 0.0, 0.8)


def scenario_model(k, shape, omega_green=0.25):
    pg, pb, rg, rb = SCENARIOS[k]
    return LimitModel.from_shape(pg, pb, rg, rb, omega_green, shape)


def one_class(p, rho, shape=0.0):
    return LimitModel.from_shape(p, p, rho, rho, 1.0, shape)


def vasicek_var(p, rho, beta):
    return norm_cdf((norm_quantile(p) + rho * norm_quantile(beta)) / math.sqrt(1 - rho**2))


def vasicek_cdf(p, rho, ell):
    return norm_cdf((math.sqrt(1 - rho**2) * norm_quantile(ell) - norm_quantile(p)) / rho)


def vasicek_density(p, rho, ell):
    z = norm_quantile(ell)
    s = math.sqrt(1 - rho**2)
    arg = (s * z - norm_quantile(p)) / rho
    return s / rho * math.exp(-0.5 * arg**2 + 0.5 * z**2)


class TestConditionalLoss:
    def test_unloaded_class_returns_pd(self):
        cls = LoanClassParams(0.03, 0.0)
        np.testing.assert_allclose(conditional_loss(cls, np.linspace(-5, 5, 11)), 0.03, rtol=1e-12)

    def test_tails(self):
        cls = LoanClassParams(0.03, 0.3)
        assert conditional_loss(cls, 1e3) < 1e-300 + 1e-16
        assert conditional_loss(cls, -1e3) == pytest.approx(1.0)

    def test_vasicek_value(self):
        cls = LoanClassParams(0.01, 0.1)
        got = conditional_loss(cls, -2.3263)
        assert got == pytest.approx(norm_cdf((norm_quantile(0.01) + 0.23263) / math.sqrt(0.99)), abs=1e-14)
        assert got == pytest.approx(0.01767, abs=1e-5)


class TestMixLoss:
    def test_single_class_limit(self):
        model = LimitModel.from_shape(0.02, 0.05, 0.2, 0.3, 1.0, 0.4)
        x = np.linspace(-4, 4, 9)
        np.testing.assert_allclose(mix_loss(model, x), conditional_loss(model.green, x), rtol=1e-14)

    def test_unloaded_is_constant(self):
        model = LimitModel.from_shape(0.02, 0.05, 0.0, 0.0, 0.3, 0.4)
        np.testing.assert_allclose(mix_loss(model, np.linspace(-3, 3, 7)), 0.3 * 0.02 + 0.7 * 0.05, rtol=1e-13)

    def test_identical_classes_reduce_to_single_class(self):
        model = LimitModel.from_shape(0.03, 0.03, 0.2, 0.2, 0.4, 0.0)
        x = np.linspace(-4, 4, 17)
        np.testing.assert_allclose(mix_loss(model, x), conditional_loss(LoanClassParams(0.03, 0.2), x), rtol=1e-14)

    @pytest.mark.parametrize("k", SCENARIOS)
    @pytest.mark.parametrize("shape", SHAPES)
    def test_strictly_decreasing(self, k, shape):
        model = scenario_model(k, shape)
        x = np.linspace(-8, 8, 4001)
        assert np.all(mix_slope(model, x) < 0)
        assert np.all(np.diff(mix_loss(model, x)) <= 0)

    def test_slope_matches_finite_difference(self):
        model = scenario_model(1, 0.8)
        x = np.linspace(-3, 3, 13)
        h = 1e-6
        fd = (mix_loss(model, x + h) - mix_loss(model, x - h)) / (2 * h)
        np.testing.assert_allclose(mix_slope(model, x), fd, rtol=1e-6)


class TestInvert:
    @settings(max_examples=100, deadline=None)
    @given(st.floats(1e-6, 1 - 1e-6), st.sampled_from(list(SCENARIOS)), st.sampled_from(SHAPES))
    def test_roundtrip(self, ell, k, shape):
        model = scenario_model(k, shape)
        assert abs(mix_loss(model, invert_v(model, ell)) - ell) <= 1e-12

    def test_vasicek_inverse(self):
        p, rho = 0.02, 0.3
        model = one_class(p, rho)
        for ell in (0.001, 0.05, 0.4):
            expected = (norm_quantile(p) - math.sqrt(1 - rho**2) * norm_quantile(ell)) / rho
            assert invert_v(model, ell) == pytest.approx(expected, abs=1e-9)

    def test_symmetric_median(self):
        model = LimitModel.from_shape(0.5, 0.5, 0.3, 0.3, 0.5, 0.0)
        assert invert_v(model, 0.5) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("ell", [0.0, 1.0, -0.1])
    def test_domain(self, ell):
        with pytest.raises(DomainError):
            invert_v(scenario_model(1, 0.0), ell)

    def test_non_invertible(self):
        model = LimitModel.from_shape(0.02, 0.05, 0.0, 0.0, 0.3, 0.4)
        with pytest.raises(NonInvertibleError):
            invert_v(model, 0.03)

    def test_outside_partial_range(self):
        # brown unloaded: v ranges over (omega_b p_b, omega_b p_b + omega_g)
        model = LimitModel.from_shape(0.02, 0.1, 0.3, 0.0, 0.5, 0.0)
        with pytest.raises(DomainError):
            invert_v(model, 0.01)

    def test_mismatched_deltas_rejected(self):
        with pytest.raises(DomainError):
            LimitModel(LoanClassParams(0.02, 0.1, 0.2, 0.5), LoanClassParams(0.02, 0.1, 0.3, 0.5))


class TestDensity:
    @pytest.mark.parametrize("k", SCENARIOS)
    @pytest.mark.parametrize("shape", SHAPES)
    def test_integrates_to_one(self, k, shape):
        model = scenario_model(k, shape)
        val, _ = integrate.quad(lambda t: mix_density(model, t), 0, 1, limit=400, points=[0.01, 0.05, 0.1, 0.3])
        assert val == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("p, rho", [(0.02, 0.3), (0.01, 0.1), (0.1, 0.5)])
    def test_vasicek_density(self, p, rho):
        model = one_class(p, rho)
        for ell in (0.005, 0.02, 0.1, 0.3):
            assert mix_density(model, ell) == pytest.approx(vasicek_density(p, rho, ell), rel=1e-10)

    def test_density_is_cdf_derivative(self):
        model = scenario_model(2, -0.8)
        ell = np.linspace(0.005, 0.2, 40)
        h = 1e-7
        fd = (mix_cdf(model, ell + h) - mix_cdf(model, ell - h)) / (2 * h)
        dens = mix_density(model, ell)
        np.testing.assert_allclose(dens, fd, rtol=1e-6, atol=1e-6 * dens.max())

    def test_density_at_var_matches_quantile_derivative(self):
        model = scenario_model(3, 0.8)
        beta, h = 0.99, 1e-6
        dvar = (mix_var(model, beta + h) - mix_var(model, beta - h)) / (2 * h)
        assert mix_density(model, mix_var(model, beta)) * dvar == pytest.approx(1.0, rel=1e-6)

    def test_outside_unit_interval(self):
        model = scenario_model(1, 0.0)
        np.testing.assert_array_equal(mix_density(model, np.array([-0.5, 0.0, 1.0, 2.0])), 0.0)

    def test_nonnegative(self):
        dens = mix_density(scenario_model(4, 0.8), np.linspace(1e-4, 1 - 1e-4, 999))
        assert np.all(dens >= 0) and np.all(np.isfinite(dens))


class TestCdfAndVar:
    @pytest.mark.parametrize("k", SCENARIOS)
    @pytest.mark.parametrize("shape", SHAPES)
    @pytest.mark.parametrize("beta", [0.99, 0.995, 0.999])
    def test_quantile_consistency(self, k, shape, beta):
        model = scenario_model(k, shape)
        assert mix_cdf(model, mix_var(model, beta)) == pytest.approx(beta, abs=1e-8)

    def test_vasicek_cdf(self):
        p, rho = 0.03, 0.2
        model = one_class(p, rho)
        for ell in (0.001, 0.03, 0.2):
            assert mix_cdf(model, ell) == pytest.approx(vasicek_cdf(p, rho, ell), abs=1e-12)

    def test_cdf_limits(self):
        model = scenario_model(1, 0.8)
        assert mix_cdf(model, 1 - 1e-9) == pytest.approx(1.0, abs=1e-9)
        assert mix_cdf(model, 1.0) == 1.0
        assert mix_cdf(model, 0.0) == 0.0
        assert np.all(np.diff(mix_cdf(model, np.linspace(1e-5, 0.5, 500))) >= -1e-15)

    def test_vasicek_var_example(self):
        assert mix_var(one_class(0.01, 0.1), 0.99) == pytest.approx(vasicek_var(0.01, 0.1, 0.99), abs=1e-12)
        assert mix_var(one_class(0.01, 0.1), 0.99) == pytest.approx(0.017678, abs=1e-6)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(1e-4, 0.3), st.floats(0.01, 0.9), st.floats(0.5, 0.9999))
    def test_vasicek_var(self, p, rho, beta):
        assert mix_var(one_class(p, rho), beta) == pytest.approx(vasicek_var(p, rho, beta), abs=1e-10)

    @pytest.mark.parametrize("k", SCENARIOS)
    def test_var_monotone_in_beta_and_pd(self, k):
        pg, pb, rg, rb = SCENARIOS[k]
        for shape in SHAPES:
            base = LimitModel.from_shape(pg, pb, rg, rb, 0.25, shape)
            betas = np.linspace(0.5, 0.999, 50)
            assert np.all(np.diff(mix_var(base, betas)) > 0)
            up_g = LimitModel.from_shape(pg * 1.1, pb, rg, rb, 0.25, shape)
            up_b = LimitModel.from_shape(pg, pb * 1.1, rg, rb, 0.25, shape)
            assert mix_var(up_g, 0.99) > mix_var(base, 0.99)
            assert mix_var(up_b, 0.99) > mix_var(base, 0.99)

    @pytest.mark.parametrize("k", SCENARIOS)
    @pytest.mark.parametrize("shape", SHAPES)
    def test_var_affine_in_omega(self, k, shape):
        pg, pb, rg, rb = SCENARIOS[k]
        v = [mix_var(LimitModel.from_shape(pg, pb, rg, rb, w, shape), 0.999) for w in (0.0, 0.5, 1.0)]
        assert v[1] == pytest.approx(0.5 * (v[0] + v[2]), abs=1e-12)

    def test_var_domain(self):
        with pytest.raises(DomainError):
            mix_var(scenario_model(1, 0.0), 1.0)

    def test_gaussian_two_class_limit_by_simulation(self):
        # delta = 0: the limit loss is v(X) with X standard normal
        model = LimitModel.from_shape(0.01, 0.04, 0.2, 0.1, 0.3, 0.0)
        x = np.random.default_rng(4).standard_normal(10**6)
        losses = mix_loss(model, x)
        for ell in (0.02, 0.03, 0.05):
            p = mix_cdf(model, ell)
            emp = np.mean(losses <= ell)
            assert abs(emp - p) < 3 * math.sqrt(p * (1 - p) / len(x))


class TestSingleClassDensity:
    def test_vasicek_value(self):
        assert single_class_density(0.02, 0.3, 0.0, 0.02) == pytest.approx(vasicek_density(0.02, 0.3, 0.02), rel=1e-12)

    @pytest.mark.parametrize("gamma", [-0.8, 0.0, 0.5, 2.0])
    def test_integrates_to_one(self, gamma):
        val, _ = integrate.quad(lambda t: single_class_density(0.03, 0.2, gamma, t), 0, 1, limit=400, points=[0.03, 0.1])
        assert val == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("gamma", [-0.8, 0.3, 1.5])
    def test_matches_mix_density(self, gamma):
        model = LimitModel.from_shape(0.03, 0.07, 0.2, 0.4, 1.0, gamma)
        ell = np.linspace(0.001, 0.5, 60)
        np.testing.assert_allclose(single_class_density(0.03, 0.2, gamma, ell), mix_density(model, ell), rtol=1e-10)

    def test_zero_rho_rejected(self):
        with pytest.raises(DomainError):
            single_class_density(0.03, 0.0, 0.5, 0.1)


class TestGeneralMix:
    def test_matches_common_delta(self):
        for k in SCENARIOS:
            for shape in SHAPES:
                model = scenario_model(k, shape)
                ell = np.linspace(0.001, 0.2, 50)
                np.testing.assert_allclose(general_mix_cdf(model.green, model.brown, ell), mix_cdf(model, ell), atol=1e-6)

    def test_unloaded_is_step(self):
        g = LoanClassParams(0.02, 0.0, 0.3, 0.4)
        b = LoanClassParams(0.05, 0.0, 0.6, 0.6)
        mean = 0.4 * 0.02 + 0.6 * 0.05
        np.testing.assert_array_equal(general_mix_cdf(g, b, np.array([mean - 1e-9, mean + 1e-9])), [0.0, 1.0])

    def test_distinct_deltas_by_simulation(self):
        g = LoanClassParams(0.005, 0.1, 0.7, 0.3)
        b = LoanClassParams(0.01, 0.1, 0.2, 0.7)
        rng = np.random.default_rng(12)
        x1 = rng.standard_normal(10**6)
        x2 = np.abs(rng.standard_normal(10**6))
        loss = sum(
            c.omega * conditional_loss(c, math.sqrt(1 - c.delta**2) * x1 + c.delta * x2) for c in (g, b)
        )
        for ell in np.quantile(loss, [0.1, 0.5, 0.9, 0.99]):
            p = general_mix_cdf(g, b, ell)
            emp = np.mean(loss <= ell)
            assert abs(emp - p) < 3 * math.sqrt(p * (1 - p) / len(loss))

    def test_monotone(self):
        g = LoanClassParams(0.02, 0.3, -0.5, 0.5)
        b = LoanClassParams(0.04, 0.2, 0.6, 0.5)
        cdf = general_mix_cdf(g, b, np.linspace(0.001, 0.3, 100))
        assert np.all(np.diff(cdf) >= -1e-12)


def test_delta_shape_parametrization():
    model = LimitModel.from_shape(0.02, 0.02, 0.1, 0.1, 0.5, 0.5)
    assert model.delta == pytest.approx(delta_from_shape(0.5))
    assert model.gamma == pytest.approx(0.5, abs=1e-14)


def test_skew_limit_by_simulation():
    # one class with skew: L = L(X), X ~ SN(0, 1, gamma)
    model = one_class(0.02, 0.25, 0.8)
    rng = np.random.default_rng(21)
    d = model.delta
    x = math.sqrt(1 - d * d) * rng.standard_normal(10**6) + d * np.abs(rng.standard_normal(10**6))
    losses = mix_loss(model, x)
    q = stats.mstats.mquantiles(losses, [0.99], alphap=1, betap=1)[0]
    assert q == pytest.approx(mix_var(model, 0.99), rel=0.02)
