"""Tests for the block Gaussian sampler, exceedance estimators, and the
pairwise normal comparison bound."""

import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal, norm

from glassclock.blockgauss import (
    BlockSpec,
    block_max_exceedance,
    block_maxima,
    deep_block_process,
    exceedance_count_stats,
    exceedance_sweep,
    normal_comparison_bound,
    prop2_functional,
    resample_mask,
    resampled_max_exceedance,
    sample_block,
    sample_blocks,
)
from glassclock.dynamics import build_clock_record
from glassclock.scales import ModelParams, derive_scales, threshold_level
from glassclock.stats import wilson_interval


def _scales():
    return derive_scales(ModelParams(N=16, p=2, beta=1.0, c=0.25, omega=0.76))


def _signed_prefix_matrix(spec: BlockSpec) -> np.ndarray:
    # Row i: U_i = sum_k w_k z_k (2 * 1{k <= i} - 1).
    w = np.full(spec.nu, spec.gamma)
    w[0] = spec.gamma1
    signs = 2.0 * (np.arange(spec.nu)[None, :] <= np.arange(spec.nu)[:, None]) - 1.0
    return signs * w[None, :]


def test_block_spec_weights_and_validation():
    spec = BlockSpec.create(N=16, p=2, nu=8)
    total = spec.gamma1**2 + (spec.nu - 1) * spec.gamma**2
    assert abs(total - 1.0) < 1e-12
    with pytest.raises(ValueError):
        BlockSpec.create(N=16, p=2, nu=9)
    with pytest.raises(ValueError):
        BlockSpec.create(N=16, p=2, nu=0)
    from_scales = BlockSpec.from_scales(_scales())
    assert from_scales.nu == _scales().nu


@pytest.mark.parametrize("N,p,nu", [(16, 2, 8), (64, 2, 20), (30, 3, 9)])
def test_signed_prefix_covariance_identity(N, p, nu):
    # The representation matrix M satisfies M M^T = 1 - 2 p |i-j| / N exactly.
    spec = BlockSpec.create(N=N, p=p, nu=nu)
    M = _signed_prefix_matrix(spec)
    cov = M @ M.T
    idx = np.arange(nu)
    target = 1.0 - 2.0 * p * np.abs(idx[:, None] - idx[None, :]) / N
    np.testing.assert_allclose(cov, target, rtol=0, atol=1e-12)


def test_sample_blocks_matches_matrix_form():
    spec = BlockSpec.create(N=16, p=2, nu=8)
    got = sample_blocks(spec, 5, np.random.default_rng(3))
    z = np.random.default_rng(3).standard_normal((5, 8))
    expected = z @ _signed_prefix_matrix(spec).T
    np.testing.assert_allclose(got, expected, rtol=0, atol=1e-12)
    single = sample_block(spec, np.random.default_rng(3))
    np.testing.assert_allclose(single, expected[0], rtol=0, atol=1e-12)


def test_sample_blocks_empirical_covariance():
    spec = BlockSpec.create(N=16, p=2, nu=8)
    reps = 40_000
    u = sample_blocks(spec, reps, np.random.default_rng(11))
    emp = (u.T @ u) / reps
    idx = np.arange(8)
    target = 1.0 - 2.0 * 2 * np.abs(idx[:, None] - idx[None, :]) / 16
    sd = np.sqrt((1.0 + target**2) / reps)
    assert np.all(np.abs(emp - target) < 5.0 * sd)


def test_block_max_exceedance_deterministic_against_manual():
    scales = _scales()
    spec = BlockSpec.from_scales(scales)
    reps = 5000
    est, (lo, hi) = block_max_exceedance(
        spec, scales, 1.0, reps, np.random.default_rng(7)
    )
    u = sample_blocks(spec, reps, np.random.default_rng(7))
    thr = threshold_level(scales, scales.N, scales.beta, 1.0)
    hits = int((u.max(axis=1) >= thr).sum())
    w_lo, w_hi = wilson_interval(hits, reps)
    scale = scales.r / spec.nu
    assert est == scale * hits / reps
    assert (lo, hi) == (scale * w_lo, scale * w_hi)


def test_exceedance_sweep_shares_stream_with_single_calls():
    scales = _scales()
    spec = BlockSpec.from_scales(scales)
    rows = exceedance_sweep(spec, scales, [0.5, 1.0], 3000, np.random.default_rng(5))
    single, _ = block_max_exceedance(spec, scales, 0.5, 3000, np.random.default_rng(5))
    assert rows[0]["estimate"] == single
    assert rows[0]["x"] == 0.5 and rows[1]["x"] == 1.0
    # Lower threshold catches at least as many blocks.
    assert rows[0]["estimate"] >= rows[1]["estimate"]
    assert set(rows[0]) == {"x", "rho", "estimate", "ci_lo", "ci_hi", "replicates"}


def test_resample_mask_density():
    rng = np.random.default_rng(2)
    mask = resample_mask(50_000, rho=10.0, alpha=0.1, rng=rng)
    assert mask.density == pytest.approx(0.1)
    frac = len(mask.indices) / mask.length
    assert abs(frac - 0.1) < 5.0 * math.sqrt(0.1 * 0.9 / mask.length)
    assert mask.indices.size == 0 or (
        mask.indices.min() >= 0 and mask.indices.max() < mask.length
    )
    with pytest.raises(ValueError):
        resample_mask(10, rho=300.0, alpha=1.0, rng=rng)
    with pytest.raises(ValueError):
        resample_mask(10, rho=-1.0, alpha=0.5, rng=rng)


def test_masked_estimators_bounded_by_unmasked():
    scales = _scales()
    spec = BlockSpec.from_scales(scales)
    reps = 4000
    full, _ = block_max_exceedance(spec, scales, 1.0, reps, np.random.default_rng(9))
    masked, _ = resampled_max_exceedance(
        spec, scales, 1.0, rho=2.0, replicates=reps, rng=np.random.default_rng(9)
    )
    # Same block draws (the mask uses a spawned child stream), fewer indices.
    assert masked <= full
    assert resampled_max_exceedance(
        spec, scales, 1.0, rho=0.0, replicates=10, rng=np.random.default_rng(0)
    ) == (0.0, (0.0, 0.0))
    assert prop2_functional(
        spec, scales, 1.0, rho=0.0, replicates=10, rng=np.random.default_rng(0)
    ) == (0.0, (0.0, 0.0))


def test_prop2_functional_basic():
    scales = _scales()
    spec = BlockSpec.from_scales(scales)
    est, (lo, hi) = prop2_functional(
        spec, scales, 1.0, rho=2.0, replicates=4000, rng=np.random.default_rng(4)
    )
    assert 0.0 <= lo <= est <= hi


def test_exceedance_count_stats_consistency():
    scales = _scales()
    spec = BlockSpec.from_scales(scales)
    stats = exceedance_count_stats(
        spec, scales, 0.25, replicates=4000, rng=np.random.default_rng(6)
    )
    assert stats["replicates"] == 4000
    assert 0.0 <= stats["hit_rate"] <= 1.0
    if stats["hit_rate"] > 0:
        assert stats["conditional_mean_count"] >= 1.0
        assert stats["mean_count"] <= stats["conditional_mean_count"]


def test_comparison_bound_equal_inputs_zero():
    cov = np.array([[1.0, 0.3], [0.3, 1.0]])
    assert normal_comparison_bound(cov, cov, np.zeros(2)) == 0.0


def test_comparison_bound_two_dim_oracle():
    # With n=2 and cov0 the identity, the pairwise bound integral is the
    # exact orthant-probability difference, so it must match scipy's
    # bivariate normal CDF to quadrature accuracy.
    rho, u = 0.6, np.array([0.3, -0.4])
    cov0 = np.eye(2)
    cov1 = np.array([[1.0, rho], [rho, 1.0]])
    bound = normal_comparison_bound(cov0, cov1, u)
    exact = multivariate_normal(cov=cov1).cdf(u) - norm.cdf(u[0]) * norm.cdf(u[1])
    assert bound > 0
    assert abs(bound - exact) < 5e-5


def test_comparison_bound_negative_shift_contributes_zero():
    # cov1 below cov0 has no positive-part pairs.
    cov0 = np.array([[1.0, 0.5], [0.5, 1.0]])
    cov1 = np.eye(2)
    assert normal_comparison_bound(cov0, cov1, np.array([0.1, 0.2])) == 0.0


def test_comparison_bound_validation():
    eye = np.eye(2)
    with pytest.raises(ValueError):
        normal_comparison_bound(np.ones((2, 3)), eye, np.zeros(2))
    with pytest.raises(ValueError):
        normal_comparison_bound(np.eye(13), np.eye(13), np.zeros(13))
    bad_diag = np.array([[2.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        normal_comparison_bound(bad_diag, eye, np.zeros(2))
    asym = np.array([[1.0, 0.2], [0.3, 1.0]])
    with pytest.raises(ValueError):
        normal_comparison_bound(asym, eye, np.zeros(2))
    not_psd = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ValueError):
        normal_comparison_bound(not_psd, eye, np.zeros(2))
    with pytest.raises(ValueError):
        normal_comparison_bound(eye, np.eye(3), np.zeros(2))
    with pytest.raises(ValueError):
        normal_comparison_bound(eye, eye, np.zeros(3))


def test_block_maxima_manual():
    energies = np.array([9.0, 1.0, 5.0, 2.0, 0.0, 3.0, 4.0])
    # Blocks over indices 1..2 and 3..4 (nu = 2): maxima 5 and 2.
    np.testing.assert_array_equal(block_maxima(energies, 2, 2), [5.0, 2.0])
    with pytest.raises(ValueError):
        block_maxima(energies, 2, 4)


def test_deep_block_process_injected_record():
    scales = _scales()
    steps = math.ceil(scales.r)
    energies = np.zeros(steps)
    level = threshold_level(scales, scales.N, scales.beta, 1.0)
    # One deep entry inside block 3 (indices 3 nu + 1 .. 4 nu).
    energies[3 * scales.nu + 2] = level + 0.1
    rec = build_clock_record(energies, np.ones(steps), scales.beta, scales.N)
    times = deep_block_process(rec, scales, delta=1.0, T=1.0)
    np.testing.assert_allclose(times, [3 * scales.nu / scales.r])
    # No hits: empty.
    rec0 = build_clock_record(
        np.zeros(steps), np.ones(steps), scales.beta, scales.N
    )
    assert deep_block_process(rec0, scales, 1.0, 1.0).size == 0
    with pytest.raises(ValueError):
        deep_block_process(rec, scales, 1.0, 2.0)
