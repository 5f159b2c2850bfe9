"""Goodness-of-fit helpers against scipy and closed-form oracles."""

import numpy as np
import pytest
from scipy import stats

from glassclock.stats import (
    empirical_cdf,
    kolmogorov_sf,
    ks_statistic,
    ks_two_sample,
    wilson_interval,
)


def _rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def test_kolmogorov_sf_matches_scipy():
    for t in (0.3, 0.5, 0.8, 1.0, 1.5, 2.0):
        assert kolmogorov_sf(t) == pytest.approx(stats.kstwobign.sf(t), abs=1e-8)
    assert kolmogorov_sf(0.0) == 1.0
    assert kolmogorov_sf(50.0) == 0.0


def test_empirical_cdf_steps():
    cdf = empirical_cdf(np.array([1.0, 2.0, 2.0, 5.0]))
    assert cdf(0.5) == 0.0
    assert cdf(1.0) == 0.25
    assert cdf(2.0) == 0.75
    assert cdf(4.9) == 0.75
    assert cdf(5.0) == 1.0
    assert np.array_equal(cdf(np.array([0.0, 2.5, 9.0])), [0.0, 0.75, 1.0])


def test_single_median_sample():
    report = ks_statistic(np.array([0.0]), stats.norm.cdf)
    assert report.statistic == pytest.approx(0.5)
    assert report.n == 1


def test_ks_statistic_against_scipy():
    samples = _rng(0).standard_normal(500)
    ours = ks_statistic(samples, stats.norm.cdf)
    theirs = stats.kstest(samples, "norm", method="asymp")
    assert ours.statistic == pytest.approx(theirs.statistic, abs=1e-12)
    assert ours.p_value == pytest.approx(theirs.pvalue, abs=1e-6)


def test_ks_self_calibration():
    # Samples drawn from the hypothesized law itself: the p-value should be
    # roughly uniform, so about 5% of repetitions land below 0.05.
    rng = _rng(1)
    low = sum(
        ks_statistic(rng.uniform(size=10_000), lambda x: min(max(x, 0.0), 1.0)).p_value
        < 0.05
        for _ in range(100)
    )
    assert abs(low / 100 - 0.05) <= 0.05


def test_ks_two_sample_against_scipy():
    rng = _rng(2)
    a = rng.standard_normal(400)
    b = rng.standard_normal(300) * 1.1
    ours = ks_two_sample(a, b)
    theirs = stats.ks_2samp(a, b, method="asymp")
    assert ours.statistic == pytest.approx(theirs.statistic, abs=1e-12)
    assert ours.p_value == pytest.approx(theirs.pvalue, rel=0.2, abs=2e-3)
    same = ks_two_sample(a, a)
    assert same.statistic == 0.0


def test_wilson_interval():
    lo, hi = wilson_interval(0, 50)
    assert lo == 0.0 and 0.0 < hi < 0.1
    lo, hi = wilson_interval(50, 50)
    assert hi == 1.0 and 0.9 < lo < 1.0
    lo, hi = wilson_interval(25, 50)
    assert lo < 0.5 < hi
    assert (lo, hi) == pytest.approx((0.366, 0.634), abs=0.01)
    with pytest.raises(ValueError):
        wilson_interval(5, 0)
    with pytest.raises(ValueError):
        wilson_interval(7, 5)
