import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from median_meta import distributions as dist
from median_meta.distributions import FIGURE1_MIXTURE, Family, MixtureParams
from median_meta.errors import DomainError, InvalidParams

N, LN, G, W, MIX = Family.NORMAL, Family.LOGNORMAL, Family.GAMMA, Family.WEIBULL, Family.MIXTURE


def scipy_dist(family, params):
    a, b = params
    if family is N:
        return stats.norm(a, b)
    if family is LN:
        return stats.lognorm(b, scale=math.exp(a))
    if family is G:
        return stats.gamma(a, scale=1 / b)
    return stats.weibull_min(b, scale=a)


def test_pdf_examples():
    assert dist.pdf(N, (35, 7), 35) == pytest.approx(0.0569918, abs=1e-7)
    assert dist.pdf(W, (1, 1), 0.5) == pytest.approx(math.exp(-0.5), rel=1e-14)
    assert dist.pdf(G, (2, 1), 0) == 0
    assert dist.pdf(LN, (0, 1), -1) == 0
    assert dist.pdf(W, (2, 3), -0.1) == 0


def test_cdf_examples():
    assert dist.cdf(N, (0, 1), 0) == 0.5
    assert dist.cdf(LN, (0, 1), 1) == pytest.approx(0.5, abs=1e-15)
    assert dist.cdf(G, (2, 1), 1) == pytest.approx(1 - 2 * math.exp(-1), rel=1e-13)
    assert dist.cdf(G, (2, 1), -3) == 0


def test_quantile_examples():
    assert dist.quantile(N, (35, 7), 0.5) == 35
    assert dist.quantile(N, (0, 1), 0.75) == pytest.approx(0.6744897501960817, abs=1e-12)
    assert dist.quantile(W, (2, 1), 0.5) == pytest.approx(2 * math.log(2), rel=1e-14)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_quantile_domain(p):
    with pytest.raises(DomainError):
        dist.quantile(N, (0, 1), p)


def test_median_examples():
    assert dist.median_of(G, (1, 2)) == pytest.approx(math.log(2) / 2, rel=1e-12)
    assert dist.median_of(MIX, FIGURE1_MIXTURE) == pytest.approx(39.0, abs=0.2)
    assert dist.median_of(N, (35, 7)) == 35


@pytest.mark.parametrize("family, params", [
    (N, (0, 0)), (N, (0, -1)), (LN, (0, 0)), (G, (0, 1)), (G, (1, -1)),
    (W, (-1, 1)), (W, (1, 0)), (N, (float("nan"), 1)), (N, (1,)),
])
def test_invalid_params(family, params):
    with pytest.raises(InvalidParams):
        dist.pdf(family, params, 1.0)


def test_mixture_params_validation():
    with pytest.raises(InvalidParams):
        MixtureParams((1, -1), (0, 1), (1, 1))
    with pytest.raises(InvalidParams):
        MixtureParams((1, 1), (0, 1), (1,))
    m = MixtureParams((2, 2), (0, 1), (1, 1))
    assert m.weights == (0.5, 0.5)
    assert math.isclose(sum(FIGURE1_MIXTURE.weights), 1.0)


params_by_family = {
    N: st.tuples(st.floats(-50, 50), st.floats(0.1, 20)),
    LN: st.tuples(st.floats(-3, 3), st.floats(0.1, 2)),
    G: st.tuples(st.floats(0.2, 40), st.floats(0.05, 40)),
    W: st.tuples(st.floats(0.1, 50), st.floats(0.3, 20)),
}
PROBE = [0.001, 0.01, 0.25, 0.5, 0.75, 0.99, 0.999]


@pytest.mark.parametrize("family", list(params_by_family))
@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_quantile_cdf_round_trip(family, data):
    params = data.draw(params_by_family[family])
    for p in PROBE:
        assert abs(dist.cdf(family, params, dist.quantile(family, params, p)) - p) < 1e-9


def test_mixture_round_trip():
    for p in PROBE:
        assert abs(dist.cdf(MIX, FIGURE1_MIXTURE, dist.quantile(MIX, FIGURE1_MIXTURE, p)) - p) < 1e-9


@pytest.mark.parametrize("family", list(params_by_family))
@settings(max_examples=30, deadline=None)
@given(data=st.data())
def test_against_scipy(family, data):
    params = data.draw(params_by_family[family])
    ref = scipy_dist(family, params)
    xs = ref.ppf([0.05, 0.3, 0.5, 0.7, 0.95])
    np.testing.assert_allclose(dist.pdf(family, params, xs), ref.pdf(xs), rtol=1e-9)
    np.testing.assert_allclose(dist.cdf(family, params, xs), ref.cdf(xs), rtol=1e-9, atol=1e-14)
    np.testing.assert_allclose(dist.quantile(family, params, [0.1, 0.5, 0.9]),
                               ref.ppf([0.1, 0.5, 0.9]), rtol=1e-8)
    assert dist.mean_of(family, params) == pytest.approx(ref.mean(), rel=1e-9)
    assert dist.variance_of(family, params) == pytest.approx(ref.var(), rel=1e-7)


@pytest.mark.parametrize("family, params", [
    (N, (35, 7)), (LN, (1, 0.5)), (G, (4, 2)), (W, (3, 2)), (MIX, FIGURE1_MIXTURE),
])
def test_pdf_matches_cdf_difference_and_integrates(family, params):
    for p in (0.1, 0.3, 0.5, 0.7, 0.9):
        x = dist.quantile(family, params, p)
        h = 1e-5 * max(1.0, abs(x))
        fd = (dist.cdf(family, params, x + h) - dist.cdf(family, params, x - h)) / (2 * h)
        assert fd == pytest.approx(dist.pdf(family, params, x), rel=1e-6)
    lo = dist.quantile(family, params, 1e-12)
    hi = dist.quantile(family, params, 1 - 1e-12)
    total, _ = integrate.quad(lambda x: dist.pdf(family, params, x), lo, hi, limit=200)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_mixture_moments_analytic():
    assert dist.mean_of(MIX, FIGURE1_MIXTURE) == pytest.approx(41.1296, abs=1e-3)
    assert dist.variance_of(MIX, FIGURE1_MIXTURE) == pytest.approx(59.6, abs=0.1)


def test_sample_moments_large_n(rng):
    x = dist.sample(MIX, FIGURE1_MIXTURE, 10 ** 6, rng)
    assert abs(x.mean() - 41.13) < 0.1
    assert abs(x.var() - 59.6) < 1.5
    y = dist.sample(N, (35, 7), 10 ** 6, rng)
    assert abs(y.std() - 7) < 0.02


@pytest.mark.parametrize("family, params", [
    (N, (1, 2)), (LN, (0.5, 0.7)), (G, (3, 1.5)), (W, (2, 1.7)), (MIX, FIGURE1_MIXTURE),
])
def test_sample_ks(family, params, rng):
    x = dist.sample(family, params, 10 ** 5, rng)
    assert stats.kstest(x, lambda t: dist.cdf(family, params, t)).pvalue > 1e-3


def test_lognormal_is_exp_of_normal():
    a = dist.sample(LN, (0.3, 0.8), 1000, np.random.default_rng(5))
    b = np.exp(dist.sample(N, (0.3, 0.8), 1000, np.random.default_rng(5)))
    np.testing.assert_array_equal(a, b)


def test_batch_quantile_matches_scalar():
    p = np.array([[0.25, 0.5, 0.75]])
    for family, params in [(N, (2, 3)), (LN, (0.1, 0.4)), (G, (2.5, 0.7)), (W, (1.5, 2.2))]:
        got = dist.batch_quantile(family, np.array([[params[0]]]), np.array([[params[1]]]), p)
        np.testing.assert_allclose(got[0], dist.quantile(family, params, p[0]), rtol=1e-14)
