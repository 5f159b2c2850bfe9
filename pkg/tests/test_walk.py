"""Walk, distance chain, and pair-counting statistics."""

import math

import numpy as np
import pytest
from scipy import stats

from glassclock.walk import (
    SpinConfig,
    Trajectory,
    bd_distribution,
    bd_step_distribution,
    pair_distance_counts,
    pair_distance_histogram,
    srw_trajectory,
    stationary_log_weight,
)


def _rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def test_empty_trajectory():
    traj = srw_trajectory(8, 0, _rng(0))
    assert traj.length == 0
    assert traj.position(0) == SpinConfig.all_plus(8)


def test_consecutive_positions_are_neighbors():
    traj = srw_trajectory(12, 200, _rng(1))
    for i in range(200):
        assert traj.position(i).hamming(traj.position(i + 1)) == 1


def test_flip_index_histogram_uniform():
    N, steps = 4, 100_000
    traj = srw_trajectory(N, steps, _rng(2))
    counts = np.bincount(traj.flips, minlength=N)
    sigma = math.sqrt(steps * (1 / N) * (1 - 1 / N))
    assert np.all(np.abs(counts - steps / N) <= 3 * sigma)


def test_hamming_examples():
    rng = _rng(3)
    a = SpinConfig.random(10, rng)
    assert a.hamming(a) == 0
    flipped = a
    for k in range(10):
        flipped = flipped.flip(k)
    assert a.hamming(flipped) == 10
    assert a.hamming(a.flip(4)) == 1
    with pytest.raises(ValueError):
        a.hamming(SpinConfig.all_plus(11))


def test_trajectory_roundtrip():
    traj = srw_trajectory(19, 57, _rng(4))
    back = Trajectory.from_bytes(traj.to_bytes())
    assert back.N == traj.N and back.length == traj.length
    assert back.position(57) == traj.position(57)
    assert np.array_equal(back.flips, traj.flips)


def test_bd_step_distribution():
    assert bd_step_distribution(8, 0) == (0.0, 1.0)
    assert bd_step_distribution(8, 8) == (1.0, 0.0)
    assert bd_step_distribution(2, 1) == (0.5, 0.5)
    with pytest.raises(ValueError):
        bd_step_distribution(8, 9)


def test_bd_distribution_small_cases():
    point = bd_distribution(6, 0, 2)
    assert point[2] == 1.0 and point.sum() == 1.0
    one = bd_distribution(6, 1, 0)
    assert one[1] == 1.0
    # mass conservation and parity support along the way
    for k in (3, 10, 57):
        dist = bd_distribution(10, k, 0)
        assert abs(dist.sum() - 1.0) < 1e-12
        odd = np.arange(11) % 2 != k % 2
        assert np.all(dist[odd] == 0.0)


def test_bd_mixing_lazy_average():
    # Raw k-step laws alternate parity classes forever, so the comparison
    # with the binomial weights is made after averaging two consecutive
    # steps; at k ~ 5 N^2 ln N the smoothed law is binomial to float noise.
    N = 10
    k = math.ceil(5 * N * N * math.log(N))
    lazy = 0.5 * (bd_distribution(N, k, 0) + bd_distribution(N, k + 1, 0))
    pi = np.exp([stationary_log_weight(N, d) for d in range(N + 1)])
    assert np.max(np.abs(lazy - pi)) < 1e-6


def test_stationary_log_weight():
    assert stationary_log_weight(2, 1) == pytest.approx(math.log(0.5))
    assert stationary_log_weight(12, 0) == pytest.approx(-12 * math.log(2))
    total = sum(math.exp(stationary_log_weight(9, d)) for d in range(10))
    assert abs(total - 1.0) < 1e-10


def test_walk_distance_matches_distance_chain():
    # dist(Y(0), Y(k)) has exactly the k-step birth-death law.
    N, k, samples = 8, 7, 100_000
    flips = _rng(5).integers(0, N, size=(samples, k))
    flat = flips + N * np.arange(samples)[:, None]
    parity = np.bincount(flat.ravel(), minlength=samples * N).reshape(samples, N) % 2
    dists = parity.sum(axis=1)
    observed = np.bincount(dists, minlength=N + 1)
    expected = bd_distribution(N, k, 0) * samples
    keep = expected >= 5
    chi2 = ((observed[keep] - expected[keep]) ** 2 / expected[keep]).sum()
    # fold the tiny-expectation cells into the test by adding their mass
    chi2 += observed[~keep].sum() ** 2 / max(expected[~keep].sum(), 1e-9)
    p = stats.chi2.sf(chi2, df=keep.sum() - 1)
    assert p > 0.01


def _brute_pair_counts(traj, d, nu, mode):
    L = traj.length + 1
    total = 0
    for i in range(L):
        for j in range(i + 1, L):
            if traj.position(i).hamming(traj.position(j)) != d:
                continue
            same = (i // nu) == (j // nu)
            if mode == "all" or (mode == "same") == same:
                total += 1
    return total


def test_pair_distance_counts_brute_force():
    for seed in range(20):
        traj = srw_trajectory(4, 6, _rng(100 + seed))
        for d in range(5):
            for mode in ("same", "cross", "all"):
                assert pair_distance_counts(traj, d, 3, mode) == _brute_pair_counts(
                    traj, d, 3, mode
                ), (seed, d, mode)


def test_pair_counts_empty_and_split():
    traj = srw_trajectory(4, 0, _rng(6))
    assert pair_distance_counts(traj, 1, 2, "same") == 0

    traj = srw_trajectory(6, 40, _rng(7))
    same, cross = pair_distance_histogram(traj, 5)
    for d in range(7):
        assert same[d] + cross[d] == _brute_pair_counts(traj, d, 5, "all")
