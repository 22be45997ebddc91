"""Component models, characteristic functions, filters, and bounds."""

import math

import numpy as np
import pytest
from scipy.special import erfc

from qttagg.errors import InvalidArgumentError
from qttagg.grids import FrequencyGrid
from qttagg.models import (MACHINE_EPS, Bernoulli, Categorical, FilterSpec,
                           Lognormal, WeightedSumModel, categorical_cf_dense,
                           categorical_cf_qtt, component_cf_dense,
                           component_moments, filter_eval, filter_qtt,
                           gauss_hermite, gaussian_cf, inv_normal_cdf,
                           lognormal_cf, model_from_json, model_to_json,
                           support_bound_single, support_bound_sum)
from qttagg.tt import tt_to_dense


def tail_quantile_oracle(q: float) -> float:
    """Bisection on the complementary error function for the upper-tail
    normal quantile (accurate where the spec's direct CDF form cancels)."""
    lo, hi = 0.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 0.5 * erfc(mid / math.sqrt(2.0)) > q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestInvNormalCdf:
    def test_median_is_zero(self):
        assert inv_normal_cdf(0.5) == pytest.approx(0.0, abs=1e-15)

    def test_known_tail_value(self):
        got = inv_normal_cdf(1.0 - 1e-8)
        assert got == pytest.approx(5.6120, abs=5e-4)
        # compare at the tail mass the float argument actually represents
        assert got == pytest.approx(tail_quantile_oracle(1.0 - (1.0 - 1e-8)),
                                    abs=1e-12)

    def test_matches_bisection_oracle_broadly(self):
        for q in (0.4, 0.1, 1e-3, 1e-6, 1e-12):
            p = 1.0 - q
            assert inv_normal_cdf(p) == pytest.approx(
                tail_quantile_oracle(1.0 - p), abs=1e-12)

    def test_symmetry(self):
        for p in (0.3, 0.05, 1e-4):
            assert inv_normal_cdf(p) == pytest.approx(-inv_normal_cdf(1 - p),
                                                      abs=1e-13)

    def test_domain_check(self):
        for bad in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(InvalidArgumentError):
                inv_normal_cdf(bad)


class TestGaussHermite:
    def test_single_node_rule(self):
        z, v = gauss_hermite(1)
        assert z[0] == 0.0
        assert v[0] == pytest.approx(math.sqrt(math.pi), rel=1e-14)

    def test_total_weight(self):
        _, v = gauss_hermite(45)
        assert v.sum() == pytest.approx(math.sqrt(math.pi), abs=1e-12)

    def test_second_moment(self):
        z, v = gauss_hermite(45)
        assert np.dot(v, z**2) == pytest.approx(math.sqrt(math.pi) / 2, abs=1e-12)

    def test_symmetry_and_positivity(self):
        z, v = gauss_hermite(44)
        assert np.allclose(z, -z[::-1])
        assert np.all(v > 0)

    def test_node_count_limits(self):
        with pytest.raises(InvalidArgumentError):
            gauss_hermite(0)
        with pytest.raises(InvalidArgumentError):
            gauss_hermite(500)


class TestCategoricalCf:
    def test_unit_mass_at_zero(self):
        comp = Categorical((0.0, 0.4, 1.1), (0.2, 0.5, 0.3))
        assert categorical_cf_dense(comp, 0.7, np.array([0.0]))[0] == pytest.approx(1.0)

    def test_bernoulli_closed_form(self):
        om = np.linspace(-4, 4, 17)
        got = categorical_cf_dense(Bernoulli(0.3), 1.0, om)
        assert np.max(np.abs(got - (0.7 + 0.3 * np.exp(1j * om)))) < 1e-14

    def test_qtt_matches_dense_on_grid(self, rng):
        freq = FrequencyGrid.for_spatial(1.0, 9)
        comp = Categorical((0.0, 0.5, 1.0), (0.25, 0.5, 0.25))
        tt = categorical_cf_qtt(comp, 0.8, freq, eps=1e-14)
        dense = categorical_cf_dense(comp, 0.8, freq.omegas())
        assert np.max(np.abs(tt_to_dense(tt) - dense)) < 1e-10

    def test_cf_axioms_on_random_instances(self, rng):
        om = np.linspace(-50, 50, 101)
        for _ in range(5):
            k = int(rng.integers(2, 6))
            p = rng.dirichlet(np.ones(k))
            vals = np.sort(rng.normal(size=k))
            comp = Categorical(tuple(vals), tuple(p))
            phi = categorical_cf_dense(comp, float(rng.uniform(0.1, 2.0)), om)
            assert abs(phi[50] - 1.0) < 1e-12          # omega = 0
            assert np.max(np.abs(phi)) <= 1 + 1e-12
            assert np.max(np.abs(phi[::-1] - np.conj(phi))) < 1e-12


class TestLognormalCf:
    def test_unit_mass_at_zero_any_node_count(self):
        for K in (1, 5, 45):
            val = lognormal_cf(0.3, 1.2, 1.0, np.array([0.0]), K=K)[0]
            assert val == pytest.approx(1.0, abs=1e-14)

    def test_hermitian_symmetry(self):
        om = np.array([0.25, 1.0, 7.5])
        pos = lognormal_cf(0.2, 0.8, 1.5, om)
        neg = lognormal_cf(0.2, 0.8, 1.5, -om)
        assert np.max(np.abs(neg - np.conj(pos))) < 1e-14

    def test_against_high_resolution_quadrature(self):
        # reference rule is converged: K=200 agrees with adaptive
        # integration of the contour integral to ~3e-15 relative
        for om, tol in ((0.5, 1e-8), (1.0, 1e-8), (5.0, 5e-7)):
            a = lognormal_cf(0.0, 1.0, 1.0, np.array([om]), K=45)[0]
            b = lognormal_cf(0.0, 1.0, 1.0, np.array([om]), K=200)[0]
            assert abs(a - b) / abs(b) < tol

    def test_qtt_matches_dense(self):
        length = support_bound_single(0.0, 1.0, 1e-8)
        freq = FrequencyGrid.for_spatial(length, 10)
        tt = lognormal_cf(0.0, 1.0, 1.0, freq, eps=1e-12)
        dense = lognormal_cf(0.0, 1.0, 1.0, freq.omegas())
        assert np.max(np.abs(tt_to_dense(tt) - dense)) < 1e-9

    def test_invalid_sigma(self):
        with pytest.raises(InvalidArgumentError):
            lognormal_cf(0.0, -1.0, 1.0, np.array([1.0]))


class TestGaussianCf:
    def test_unit_at_zero(self):
        assert gaussian_cf(0.3, 2.0, np.array([0.0]))[0] == pytest.approx(1.0)

    def test_standard_value(self):
        assert gaussian_cf(0.0, 1.0, np.array([1.0]))[0] == pytest.approx(
            math.exp(-0.5), rel=1e-14)

    def test_modulus_bound(self):
        om = np.linspace(-10, 10, 201)
        assert np.max(np.abs(gaussian_cf(0.5, 0.7, om))) <= 1 + 1e-12


class TestFilters:
    def test_raised_cosine_endpoints(self):
        spec = FilterSpec("rc")
        vals = filter_eval(spec, np.array([0.0, 1.0, -1.0]))
        assert vals[0] == pytest.approx(1.0)
        assert abs(vals[1]) < 1e-15 and abs(vals[2]) < 1e-15

    def test_sharpened_profile_range(self):
        spec = FilterSpec("src")
        eta = np.linspace(-1, 1, 10001)
        vals = filter_eval(spec, eta)
        assert filter_eval(spec, np.array([0.0]))[0] == pytest.approx(1.0)
        assert vals.min() >= -1e-14
        assert vals.max() <= 1.0 + 1e-12

    def test_exponential_reaches_machine_epsilon(self):
        val = filter_eval(FilterSpec("exp"), np.array([1.0]))[0]
        assert val <= 2 * MACHINE_EPS
        assert val >= 0.5 * MACHINE_EPS

    def test_sharpened_order_eight_contact_at_origin(self):
        # derivatives 1..7 vanish iff (1 - sigma) stays Theta(eta^8) down a
        # geometric sequence; any lower-order term would blow the ratio up
        spec = FilterSpec("src")
        c8 = 35.0 * math.pi**8 / 256.0
        for eta in (0.1, 0.05, 0.025, 0.0125):
            drop = 1.0 - filter_eval(spec, np.array([eta, -eta]))
            ratios = drop / eta**8
            assert np.all(ratios >= 0.85 * c8)
            assert np.all(ratios <= 1.15 * c8)
        tight = 1.0 - filter_eval(spec, np.array([0.0125]))[0]
        assert tight / 0.0125**8 == pytest.approx(c8, rel=2e-3)

    def test_unknown_kind_rejected(self):
        with pytest.raises(InvalidArgumentError):
            FilterSpec("boxcar")

    def test_qtt_forms_match_dense(self):
        freq = FrequencyGrid(8.0, 9)
        eta = freq.omegas() / freq.omega_max
        for name, tol in (("rc", 1e-12), ("src", 1e-11), ("exp", 1e-10),
                          ("none", 1e-15)):
            spec = FilterSpec(name)
            got = tt_to_dense(filter_qtt(spec, freq)).real
            assert np.max(np.abs(got - filter_eval(spec, eta))) < tol


class TestSupportBounds:
    def test_paper_scale_single(self):
        b = support_bound_single(0.0, 1.0, 1e-8)
        assert 270.0 <= b <= 277.0

    def test_median_case(self):
        assert support_bound_single(0.0, 2.0, 0.5) == pytest.approx(1.0, rel=1e-10)

    def test_explicit_formula(self):
        got = support_bound_single(1.0, 2.0, 1e-6)
        want = math.exp(1.0 + 2.0 * inv_normal_cdf(1.0 - 1e-6))
        assert got == pytest.approx(want, rel=1e-13)

    def test_sum_reduces_to_single_for_one_component(self):
        model = WeightedSumModel((Lognormal(0.2, 1.1),), (0.7,))
        got = support_bound_sum(model, 1e-8)
        want = math.exp(0.2 + math.log(0.7) + 1.1 * inv_normal_cdf(1 - 1e-8))
        assert got == pytest.approx(want, rel=1e-9)

    def test_monotone_in_delta(self):
        model = WeightedSumModel((Lognormal(0.0, 1.0), Lognormal(0.5, 2.0)),
                                 (0.4, 0.6))
        assert support_bound_sum(model, 1e-10) > support_bound_sum(model, 1e-6)

    def test_residual_at_root(self, rng):
        comps = tuple(Lognormal(float(rng.uniform(-1, 1)),
                                float(rng.uniform(0.5, 2.5))) for _ in range(3))
        w = rng.uniform(0.1, 1.0, 3)
        model = WeightedSumModel(comps, tuple(w / w.sum()))
        delta = 1e-7
        b = support_bound_sum(model, delta)
        z = np.array([(math.log(b) - c.mu - math.log(wi)) / c.sigma
                      for c, wi in zip(model.components, model.weights)])
        residual = abs(float(np.sum(0.5 * erfc(z / math.sqrt(2.0)))) - delta)
        assert residual < 1e-6 * delta

    def test_rejects_discrete_components(self):
        model = WeightedSumModel((Bernoulli(0.2),), (1.0,))
        with pytest.raises(InvalidArgumentError):
            support_bound_sum(model, 1e-6)


class TestWpbEnvelope:
    def test_gaussian_envelope_bound(self, rng):
        """Modulus of the aggregate indicator characteristic function stays
        under the variance-driven Gaussian envelope up to pi / w_max."""
        for _ in range(5):
            D = int(rng.integers(3, 12))
            w = rng.uniform(0.05, 1.0, D)
            w = w / w.sum()
            p = rng.beta(2.0, 10.0, D)
            model = WeightedSumModel(tuple(Bernoulli(float(x)) for x in p),
                                     tuple(float(x) for x in w))
            var = sum(wi**2 * pi * (1 - pi) for wi, pi in zip(w, p))
            om = np.linspace(-np.pi / w.max(), np.pi / w.max(), 401)
            phi = np.ones(om.size, dtype=complex)
            for comp, wi in zip(model.components, model.weights):
                phi *= categorical_cf_dense(comp, wi, om)
            envelope = np.exp(-2.0 * var * om**2 / np.pi**2)
            assert np.all(np.abs(phi) <= envelope + 1e-12)


class TestModelJson:
    def test_roundtrip(self):
        model = WeightedSumModel(
            (Bernoulli(0.2), Categorical((0.0, 1.0, 2.0), (0.3, 0.3, 0.4)),
             Lognormal(0.1, 1.5)),
            (0.2, 0.3, 0.5))
        back = model_from_json(model_to_json(model))
        assert back.weights == model.weights
        assert back.components == model.components

    def test_error_names_component(self):
        text = ('{"weights":[0.5,0.5],"components":['
                '{"type":"bernoulli","p":0.2},'
                '{"type":"categorical","values":[0,1],"probs":[0.7,0.4]}]}')
        with pytest.raises(InvalidArgumentError, match="component 1"):
            model_from_json(text)

    def test_zero_weights_dropped(self):
        model = WeightedSumModel((Bernoulli(0.5), Bernoulli(0.2)), (1.0, 0.0))
        assert model.size == 1

    def test_normalization(self):
        model = WeightedSumModel((Bernoulli(0.5), Bernoulli(0.2)), (2.0, 6.0),
                                 normalize_weights=True)
        assert model.weights == (0.25, 0.75)


class TestMoments:
    def test_bernoulli(self):
        mean, var, rho = component_moments(Bernoulli(0.5))
        assert (mean, var, rho) == (0.5, 0.25, 0.125)

    def test_lognormal_closed_forms(self):
        mean, var, _ = component_moments(Lognormal(0.3, 0.8))
        assert mean == pytest.approx(math.exp(0.3 + 0.32), rel=1e-12)
        assert var == pytest.approx(
            (math.exp(0.64) - 1) * math.exp(0.6 + 0.64), rel=1e-12)

    def test_lognormal_abs_third_moment(self):
        # brute-force oracle on a fine z-grid
        mu, sigma = 0.1, 0.6
        mean = math.exp(mu + sigma**2 / 2)
        z = np.linspace(-12, 12, 2000001)
        dens = np.exp(-z**2 / 2) / math.sqrt(2 * math.pi)
        want = np.trapezoid(np.abs(np.exp(mu + sigma * z) - mean) ** 3 * dens, z)
        _, _, rho = component_moments(Lognormal(mu, sigma))
        assert rho == pytest.approx(want, rel=1e-9)
