"""Tests for the Monte-Carlo rate engine and its quadrature cross-check."""

import math

import numpy as np
import pytest

from cvconf.holevo import single_point_holevo
from cvconf.inference import single_point_mi
from cvconf.protocol import ProtocolParams, mean_coefficients, transmissivity_from_distance
from cvconf.rates import (
    BLOCK_SIZE,
    estimate_rates_mc,
    quadrature_cross_check,
    single_point_rate,
    sweep_distance,
    _mi_chi_batch,
)


class TestSinglePointRate:
    def test_lossless_zero_magnitudes(self):
        p = ProtocolParams(tau=(1.0, 1.0, 1.0))
        assert single_point_rate((0, 0, 0), 0.0, p) == 0.0

    def test_lossless_equals_mutual_information(self):
        p = ProtocolParams(tau=(1.0, 1.0, 1.0))
        mags, gamma = (2.0, 2.0, 2.0), 0.0
        rate = single_point_rate(mags, gamma, p)
        mi = single_point_mi(mags, gamma, p)
        assert abs(single_point_holevo(mags, gamma, p)) <= 1e-12
        assert rate == pytest.approx(mi, abs=1e-12)
        assert rate > 0.0

    def test_recomposition(self):
        rng = np.random.default_rng(51)
        for _ in range(20):
            p = ProtocolParams(tau=tuple(rng.uniform(0.3, 1.0, 3)))
            mags = np.abs(rng.normal(0, 1.2, 3))
            gamma = rng.normal(0, 2)
            want = single_point_mi(mags, gamma, p) - single_point_holevo(mags, gamma, p)
            assert single_point_rate(mags, gamma, p) == pytest.approx(want, abs=1e-12)

    def test_can_be_negative(self):
        p = ProtocolParams(tau=(0.5, 0.5, 0.5))
        assert single_point_rate((1.0, 1.0, 1.0), 0.0, p) < 0.0


class TestEstimateRatesMc:
    def test_post_selected_dominates_raw(self):
        p = ProtocolParams(tau=(0.9, 0.9, 0.9))
        raw, post = estimate_rates_mc(p, 50_000, seed=1)
        assert post.value >= raw.value
        assert post.value >= 0.0
        assert post.value >= -3.0 * post.std_error

    def test_lossless_rates_coincide(self):
        p = ProtocolParams(tau=(1.0, 1.0, 1.0))
        raw, post = estimate_rates_mc(p, 100_000, seed=2)
        assert post.value == pytest.approx(raw.value, abs=1e-12)

    def test_reproducible_given_seed(self):
        p = ProtocolParams(tau=(0.9, 0.9, 0.9))
        a = estimate_rates_mc(p, 30_000, seed=7)
        b = estimate_rates_mc(p, 30_000, seed=7)
        assert a == b

    def test_bit_identical_across_worker_counts(self):
        p = ProtocolParams(tau=(0.93, 0.93, 0.93))
        n = 2 * BLOCK_SIZE + 1234  # more blocks than workers, ragged tail
        serial = estimate_rates_mc(p, n, seed=3, n_workers=1)
        parallel = estimate_rates_mc(p, n, seed=3, n_workers=2)
        assert serial[0].value == parallel[0].value
        assert serial[0].std_error == parallel[0].std_error
        assert serial[1].value == parallel[1].value
        assert serial[1].std_error == parallel[1].std_error

    def test_doubling_samples_is_statistically_stable(self):
        p = ProtocolParams(tau=(0.95, 0.95, 0.95))
        small = estimate_rates_mc(p, 50_000, seed=4)[1]
        large = estimate_rates_mc(p, 100_000, seed=4)[1]
        combined = math.hypot(small.std_error, large.std_error)
        assert abs(small.value - large.value) <= 4.0 * combined

    def test_pointwise_bounds(self):
        rng = np.random.default_rng(52)
        p = ProtocolParams(tau=tuple(rng.uniform(0.4, 1.0, 3)))
        mags = np.abs(rng.normal(0, 1.0, size=(5_000, 3)))
        gamma = rng.normal(0, 2, 5_000)
        mi, chi = _mi_chi_batch(mags, gamma, p)
        rate = mi - chi
        assert np.all(rate <= mi + 1e-12)
        assert np.all(mi <= 1.0)
        assert np.all(rate >= -chi - 1e-12)
        assert np.all(chi <= 1.0 + 1e-9)

    def test_rejects_bad_arguments(self):
        p = ProtocolParams(tau=(1.0, 1.0, 1.0))
        with pytest.raises(ValueError, match="n_samples"):
            estimate_rates_mc(p, 0)
        with pytest.raises(ValueError, match="seed"):
            estimate_rates_mc(p, 10, seed=-1)


class TestQuadratureCrossCheck:
    def test_lossless_agrees_with_monte_carlo(self):
        """At unit transmissivity the integrand is the mutual information
        alone, so the deterministic integral must sit on the MC estimate."""
        p = ProtocolParams(tau=(1.0, 1.0, 1.0))
        quad = quadrature_cross_check(p, nodes_per_axis=24)
        raw, post = estimate_rates_mc(p, 200_000, seed=5)
        assert quad.std_error == 0.0
        assert quad.method == "quadrature"
        assert abs(quad.value - post.value) <= 4.0 * post.std_error
        assert abs(quad.value - raw.value) <= 4.0 * raw.std_error

    def test_half_domain_parity(self):
        p = ProtocolParams(tau=(0.92, 0.92, 0.92))
        full = quadrature_cross_check(p, nodes_per_axis=16)
        half = quadrature_cross_check(p, nodes_per_axis=16, gamma_half_domain=True)
        assert half.value == pytest.approx(full.value, abs=1e-10)

    def test_node_count_convergence(self):
        p = ProtocolParams(tau=(1.0, 1.0, 1.0))
        coarse = quadrature_cross_check(p, nodes_per_axis=16)
        fine = quadrature_cross_check(p, nodes_per_axis=32)
        assert coarse.value == pytest.approx(fine.value, rel=1e-3)

    def test_rejects_too_few_nodes(self):
        p = ProtocolParams(tau=(1.0, 1.0, 1.0))
        with pytest.raises(ValueError, match="nodes_per_axis"):
            quadrature_cross_check(p, nodes_per_axis=4)


class TestSweepDistance:
    def test_tau_mapping_and_determinism(self):
        template = ProtocolParams(tau=(1.0, 1.0, 1.0))
        distances = [0.0, 1.0, 2.0]
        a = sweep_distance(template, distances, 20_000, seed=6)
        b = sweep_distance(template, distances, 20_000, seed=6)
        for pa, pb in zip(a, b):
            assert pa == pb
        for point in a:
            want = transmissivity_from_distance(point.distance_km, 0.02)
            assert abs(point.tau - want) <= 1e-15

    def test_zero_distance_has_largest_rate(self):
        template = ProtocolParams(tau=(1.0, 1.0, 1.0))
        points = sweep_distance(template, [0.0, 1.0, 2.0, 3.0], 50_000, seed=7)
        best = max(points, key=lambda s: s.estimate.value)
        assert best.distance_km == 0.0

    def test_non_increasing_within_noise(self):
        template = ProtocolParams(tau=(1.0, 1.0, 1.0))
        points = sweep_distance(template, [0.0, 1.0, 2.0, 3.0], 50_000, seed=8)
        for near, far in zip(points, points[1:]):
            slack = 2.0 * math.hypot(near.estimate.std_error, far.estimate.std_error)
            assert far.estimate.value <= near.estimate.value + slack


def test_weights_shrink_with_distance():
    """The outcome-mean coefficients decay like sqrt(tau)."""
    template = ProtocolParams(tau=(1.0, 1.0, 1.0))
    w0 = mean_coefficients(template.at_distance(0.0))
    w5 = mean_coefficients(template.at_distance(5.0))
    tau5 = transmissivity_from_distance(5.0)
    assert np.allclose(w5, w0 * math.sqrt(tau5), atol=1e-14)
