import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

import oracles
from conftest import gauss_entropy
from epideficit import GaussMix, entropy_direct, fisher_direct, lieb_combine, moments, pdf, sample, score
from epideficit import mixture as mx
from epideficit.quadrature import integrate_line
from strategies import mixtures, random_mixture

G = GaussMix.gaussian

# Frozen outputs of the brute-force oracles in oracles.py.
SCORE_BIMODAL_AT_03 = -0.008687387587080764      # centered difference, h = 1e-6
FISHER_SEPARATED = 0.7256103648171592            # trapezoid, 2^20 points on [-12, 12]
ENTROPY_SEPARATED = 2.1082364662337527           # trapezoid, 2^20 points on [-12, 12]


class TestConstruction:
    def test_arrays_are_read_only(self, bimodal):
        with pytest.raises(ValueError):
            bimodal.means[0] = 3.0

    @pytest.mark.parametrize("args", [
        ([1.0], [0.0, 1.0], [1.0]),
        ([0.5, 0.6], [0, 0], [1, 1]),
        ([1.0], [0.0], [1e-9]),
        ([1.0], [math.nan], [1.0]),
        ([1.5, -0.5], [0, 0], [1, 1]),
        ([], [], []),
    ])
    def test_rejects_invalid(self, args):
        with pytest.raises(ValueError):
            GaussMix(*args)

    def test_minimum_variance_accepted(self):
        assert GaussMix.gaussian(0.0, 1e-8).variances[0] == 1e-8

    def test_normalized(self):
        gm = GaussMix.normalized([2, 2], [0, 1], [1, 1])
        np.testing.assert_array_equal(gm.weights, [0.5, 0.5])

    def test_equality_and_gaussian_flag(self, bimodal):
        assert G(0, 1) == GaussMix([1.0], [0.0], [1.0])
        assert G(0, 1) != G(0, 2)
        assert G(0, 1).is_gaussian and not bimodal.is_gaussian
        assert GaussMix([0.5, 0.5], [1, 1], [2, 2]).is_gaussian


class TestPdf:
    def test_standard_normal_origin(self):
        assert pdf(G(0, 1), 0.0) == pytest.approx(0.3989422804, abs=1e-10)

    def test_scaled_normal(self):
        assert pdf(G(2, 4), 2.0) == pytest.approx(0.1994711402, abs=1e-10)

    def test_bimodal_origin(self, bimodal):
        assert pdf(bimodal, 0.0) == pytest.approx(norm.pdf(1.0), rel=1e-14)
        assert pdf(bimodal, 0.0) == pytest.approx(0.2419707245, abs=1e-10)

    def test_far_tail_is_finite(self):
        lp = G(0, 1).logpdf(80.0)
        assert np.isfinite(lp) and lp == pytest.approx(-0.5 * 6400 - 0.5 * math.log(2 * math.pi))

    @given(gm=mixtures(), x=st.floats(-10, 10))
    @settings(max_examples=60, deadline=None)
    def test_matches_scipy(self, gm, x):
        ref = oracles.mix_pdf(gm.weights, gm.means, gm.variances, x)
        assert pdf(gm, x) == pytest.approx(ref, rel=1e-12, abs=1e-300)

    @given(gm=mixtures())
    @settings(max_examples=25, deadline=None)
    def test_integrates_to_one(self, gm):
        c, hw = gm.window()
        assert abs(integrate_line(lambda x: pdf(gm, x), mx.DEFAULT_SETTINGS.line(), c, hw).value - 1) <= 1e-9


class TestScore:
    def test_gaussian(self):
        assert score(G(0, 1), 1.7) == pytest.approx(-1.7, abs=1e-15)
        assert score(G(3, 0.25), 3.0) == 0.0

    def test_bimodal_against_finite_difference(self, bimodal):
        assert score(bimodal, 0.3) == pytest.approx(SCORE_BIMODAL_AT_03, abs=1e-9)

    def test_oracle_reproduces_frozen_value(self, bimodal):
        assert oracles.fd_score([.5, .5], [-1, 1], [1, 1], 0.3) == pytest.approx(SCORE_BIMODAL_AT_03, abs=1e-12)

    @given(gm=mixtures())
    @settings(max_examples=25, deadline=None)
    def test_finite_differences_at_64_points(self, gm):
        rng = np.random.default_rng(0)
        c, hw = gm.window()
        x = c + 0.3 * hw * rng.uniform(-1, 1, 64)
        h = 1e-5
        fd = (gm.logpdf(x + h) - gm.logpdf(x - h)) / (2 * h)
        sc = score(gm, x)
        assert np.max(np.abs(sc - fd) / np.maximum(np.abs(sc), 1e-2)) <= 1e-6


class TestFisher:
    def test_unit_gaussian(self):
        assert fisher_direct(G(0, 1)) == pytest.approx(1.0, abs=1e-9)

    def test_location_invariant(self):
        assert fisher_direct(G(5, 4)) == pytest.approx(0.25, abs=1e-9)

    def test_separated_bimodal_oracle(self):
        assert fisher_direct(GaussMix([.5, .5], [-2, 2], [1, 1])) == pytest.approx(FISHER_SEPARATED, abs=1e-9)

    @given(gm=mixtures())
    @settings(max_examples=25, deadline=None)
    def test_cramer_rao(self, gm):
        assert fisher_direct(gm) >= 1 / moments(gm)[1] - 1e-12

    def test_trace_records_quadrature(self):
        trace = []
        fisher_direct(G(0, 1), trace=trace)
        assert trace[0][0] == "fisher_direct" and trace[0][1].converged


class TestEntropy:
    @pytest.mark.parametrize("var,expected", [(1.0, 1.4189385332), (4.0, 2.1120857137)])
    def test_gaussian(self, var, expected):
        assert entropy_direct(G(0, var)) == pytest.approx(expected, abs=1e-9)
        assert entropy_direct(G(0, var)) == pytest.approx(gauss_entropy(var), abs=1e-9)

    def test_separated_bimodal_oracle(self):
        h = entropy_direct(GaussMix([.5, .5], [-3, 3], [1, 1]))
        assert h == pytest.approx(ENTROPY_SEPARATED, abs=1e-9)
        assert gauss_entropy(1) < h < gauss_entropy(1) + math.log(2)

    @given(mean=st.floats(-10, 10), var=st.floats(0.01, 100))
    @settings(max_examples=30, deadline=None)
    def test_gaussian_property(self, mean, var):
        assert entropy_direct(G(mean, var)) == pytest.approx(gauss_entropy(var), abs=1e-9)


class TestMoments:
    def test_closed_forms(self, bimodal):
        assert moments(G(3, 2)) == (3.0, 2.0)
        assert moments(bimodal) == (0.0, 2.0)

    def test_monte_carlo(self):
        gm = GaussMix([0.2, 0.5, 0.3], [-1.5, 0.4, 2.0], [0.3, 1.1, 0.6])
        x = mx.sample_arrays(gm, 3, 10 ** 6)[0]
        mean, var = moments(gm)
        se_mean = math.sqrt(var / x.size)
        se_var = math.sqrt(np.var((x - mean) ** 2) / x.size)
        assert abs(x.mean() - mean) <= 4 * se_mean
        assert abs(x.var() - var) <= 4 * se_var


class TestSample:
    def test_mean_bound(self):
        values = np.array([s.value for s in sample(G(0, 1), 1, 10 ** 5)])
        assert abs(values.mean()) <= 4 / math.sqrt(values.size)

    def test_deterministic(self, bimodal):
        assert sample(bimodal, 9, 100) == sample(bimodal, 9, 100)
        assert sample(bimodal, 9, 100) != sample(bimodal, 10, 100)

    def test_component_frequency(self):
        comps = np.array([s.component for s in sample(GaussMix([0.9, 0.1], [0, 10], [1, 1]), 7, 10 ** 5)])
        assert abs(np.mean(comps == 1) - 0.1) <= 0.004

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            sample(G(0, 1), 1, 0)


class TestLiebCombine:
    def test_gaussian_stability(self):
        out = lieb_combine(G(0, 1), G(0, 1), 0.5)
        assert out.K == 1 and out.means[0] == 0.0
        assert out.variances[0] == pytest.approx(1.0, abs=1e-15)

    def test_gaussian_variance(self):
        out = lieb_combine(G(0, 1), G(0, 4), 0.5)
        assert out.K == 1 and out.variances[0] == pytest.approx(2.5, abs=1e-15)

    def test_component_count_and_moments(self):
        a = GaussMix([0.4, 0.6], [-1, 2], [0.5, 1.5])
        b = GaussMix([0.2, 0.3, 0.5], [0, 1, -2], [1, 0.3, 0.7])
        out = lieb_combine(a, b, 0.3)
        (ma, va), (mb, vb), (m, v) = moments(a), moments(b), moments(out)
        assert out.K == 6
        assert m == pytest.approx(math.sqrt(0.7) * ma + math.sqrt(0.3) * mb, abs=1e-14)
        assert v == pytest.approx(0.7 * va + 0.3 * vb, abs=1e-13)

    def test_endpoints(self, bimodal):
        assert lieb_combine(bimodal, G(0, 1), 0.0) == bimodal
        assert lieb_combine(bimodal, G(0, 1), 1.0) == G(0, 1)
        with pytest.raises(ValueError):
            lieb_combine(bimodal, bimodal, 1.2)

    @given(a=mixtures(k_max=2), b=mixtures(k_max=2), alpha=st.floats(0.05, 0.95))
    @settings(max_examples=15, deadline=None)
    def test_matches_convolution_oracle(self, a, b, alpha):
        out = lieb_combine(a, b, alpha)
        sa, sb = mx.scale(a, math.sqrt(1 - alpha)), mx.scale(b, math.sqrt(alpha))
        xs = np.linspace(-4, 4, 32)
        t = np.linspace(-25, 25, 2 ** 16)
        pa = oracles.mix_pdf(sa.weights, sa.means, sa.variances, xs[:, None] - t[None, :])
        pb = oracles.mix_pdf(sb.weights, sb.means, sb.variances, t)
        conv = np.trapezoid(pa * pb, t, axis=1)
        np.testing.assert_allclose(pdf(out, xs), conv, atol=1e-8)

    def test_entropy_sign(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            a, b = random_mixture(rng), random_mixture(rng)
            alpha = rng.uniform(0.1, 0.9)
            h = entropy_direct(lieb_combine(a, b, alpha))
            assert h >= (1 - alpha) * entropy_direct(a) + alpha * entropy_direct(b) - 1e-8
