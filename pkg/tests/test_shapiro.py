import numpy as np
import pytest
from scipy import stats

from median_meta.errors import SampleSizeError
from median_meta.shapiro import shapiro_wilk


@pytest.mark.parametrize("n", [3, 4, 5, 7, 11, 12, 20, 50, 100, 500, 2000, 5000])
def test_matches_scipy(n):
    rng = np.random.default_rng(n)
    for x in (rng.normal(size=n), rng.lognormal(size=n), rng.uniform(size=n)):
        w, p = shapiro_wilk(x)
        ref = stats.shapiro(x)
        assert w == pytest.approx(ref.statistic, abs=1e-6)
        assert p == pytest.approx(ref.pvalue, abs=1e-5)


def test_expected_order_statistics_are_nearly_linear():
    n = 20
    m = stats.norm.ppf((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    w, p = shapiro_wilk(m)
    assert w > 0.99
    assert p > 0.5


def test_range_and_errors():
    w, p = shapiro_wilk([1.0, 2.0, 4.0])
    assert 0 < w <= 1 and 0 <= p <= 1
    with pytest.raises(SampleSizeError):
        shapiro_wilk([1.0, 2.0])
    with pytest.raises(SampleSizeError):
        shapiro_wilk(np.arange(5001.0))
    with pytest.raises(ValueError):
        shapiro_wilk([3.0] * 10)


def test_power_against_lognormal():
    rng = np.random.default_rng(9)
    rejects = [shapiro_wilk(rng.lognormal(size=100))[1] < 0.05 for _ in range(1000)]
    assert np.mean(rejects) > 0.95
