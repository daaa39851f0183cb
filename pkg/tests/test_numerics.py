import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from numerics import (ChiDist, QuadratureConfig, SeededSampler, chi_cdf, chi_moment, chi_sf, expect_chi,
                      gauss_block, gauss_matrix, kappa, log_gamma, mc_evaluate, mean_se, mixed_chi_tail,
                      operator_norm, sigma_min, smallest_sv)
from utils_conic import DomainError, parallel_map


def test_log_gamma_matches_factorials():
    assert log_gamma(5.0) == pytest.approx(math.log(24.0))
    assert log_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi))
    with pytest.raises(DomainError):
        log_gamma(0.0)


def test_chi_moments():
    assert chi_moment(0, 0.0) == 1.0
    assert chi_moment(0, 2.0) == 0.0
    assert chi_moment(5, 2.0) == pytest.approx(5.0)
    assert chi_moment(1, 1.0) == pytest.approx(math.sqrt(2.0 / math.pi))
    assert ChiDist(3).mean == pytest.approx(2.0 * math.sqrt(2.0 / math.pi))


@given(k=st.integers(min_value=1, max_value=60), x=st.floats(min_value=0.0, max_value=15.0))
@settings(max_examples=50, deadline=None)
def test_chi_cdf_and_sf_are_complementary(k, x):
    assert chi_cdf(k, x) + chi_sf(k, x) == pytest.approx(1.0, abs=1e-12)


def test_chi_point_mass():
    assert chi_sf(0, 0.0) == 1.0
    assert chi_sf(0, 0.1) == 0.0
    assert chi_cdf(0, 0.0) == 1.0


def test_expect_chi_recovers_second_moment():
    for k in (1, 4, 25):
        assert expect_chi(lambda x: x * x, k) == pytest.approx(float(k), rel=1e-8)
    assert expect_chi(lambda x: 3.0 + x, 0) == 3.0


def test_tail_cut_leaves_negligible_mass():
    cfg = QuadratureConfig()
    for k in (1, 10, 200):
        assert chi_sf(k, cfg.tail_cut(k)) <= 2 * cfg.tail_mass


def test_mixed_chi_tail_known_values():
    # χ_2 alone: P{χ_2 ≥ λ} = exp(−λ²/2)
    assert mixed_chi_tail(0, 2, 1.5, "+") == pytest.approx(math.exp(-1.125), rel=1e-8)
    # |g'| − |g| is symmetric
    assert mixed_chi_tail(1, 1, 0.0, "-") == pytest.approx(0.5, abs=1e-8)
    assert mixed_chi_tail(3, 3, -100.0, "-") == pytest.approx(1.0)
    with pytest.raises(DomainError):
        mixed_chi_tail(1, 1, 0.0, "*")


def test_sum_tail_against_direct_integration():
    # χ_1 + χ_1 ≥ λ: P{|a| + |b| ≥ λ} = 1 − P{|a| + |b| < λ}
    lam = 1.3
    rng = np.random.default_rng(3)
    G = np.abs(rng.standard_normal((400_000, 2))).sum(axis=1)
    assert mixed_chi_tail(1, 1, lam, "+") == pytest.approx(float((G >= lam).mean()), abs=5e-3)


def test_sampler_is_reproducible_and_streams_differ():
    a = gauss_matrix(SeededSampler(11, 6).substream(3), 4, 5)
    b = gauss_matrix(SeededSampler(11, 6).substream(3), 4, 5)
    c = gauss_matrix(SeededSampler(11, 6).substream(4), 4, 5)
    d = gauss_matrix(SeededSampler(11, 7).substream(3), 4, 5)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    assert not np.allclose(a, d)
    with pytest.raises(DomainError):
        SeededSampler(0, -1)


def test_mc_evaluate_does_not_depend_on_workers():
    sampler = SeededSampler(5, 2)
    func = lambda G: np.linalg.norm(G, axis=1)
    serial = mc_evaluate(func, sampler, 10_000, 3, workers=1)
    pooled = mc_evaluate(func, sampler, 10_000, 3, workers=4)
    np.testing.assert_array_equal(serial, pooled)
    assert serial.shape == (10_000,)
    # first chunk is the block of substream 0
    first = np.linalg.norm(gauss_block(sampler.substream(0), 4096, 3), axis=1)
    np.testing.assert_array_equal(serial[:4096], first)


def test_parallel_map_keeps_order():
    assert parallel_map(lambda i: i * i, range(20), workers=4) == [i * i for i in range(20)]


def test_spectral_helpers():
    A = np.diag([3.0, 1.0])
    assert operator_norm(A) == pytest.approx(3.0)
    assert smallest_sv(A) == pytest.approx(1.0)
    assert kappa(A) == pytest.approx(3.0)
    wide = np.ones((1, 3))
    assert sigma_min(wide) == 0.0
    assert smallest_sv(wide) == pytest.approx(math.sqrt(3.0))
    assert kappa(np.array([[1.0, 0.0], [0.0, 0.0]])) == math.inf
    with pytest.raises(DomainError):
        kappa(np.zeros((2, 2)))


def test_mean_se():
    mean, se = mean_se(np.array([1.0, 3.0]))
    assert mean == 2.0
    assert se == pytest.approx(1.0)
    assert mean_se(np.array([4.0])) == (4.0, 0.0)
