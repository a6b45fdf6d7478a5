"""Tests for the protocol structure: densities, weights, relay pipeline."""

import math

import numpy as np
import pytest

from cvconf.protocol import (
    SIGN_PATTERNS,
    ProtocolParams,
    eve_conditional_means,
    joint_density,
    mean_coefficients,
    outcome_density,
    simulate_relay,
    transmissivity_from_distance,
)

SQRT_2PI = math.sqrt(2.0 * math.pi)


def normal_pdf(x, mean=0.0, sd=1.0):
    return math.exp(-0.5 * ((x - mean) / sd) ** 2) / (SQRT_2PI * sd)


def random_params(rng, **overrides):
    kwargs = dict(
        tau=tuple(rng.uniform(0.05, 1.0, 3)),
        sigma=tuple(rng.uniform(0.2, 3.0, 3)),
    )
    kwargs.update(overrides)
    return ProtocolParams(**kwargs)


class TestProtocolParams:
    def test_defaults(self):
        p = ProtocolParams(tau=(1.0, 1.0, 1.0))
        assert p.cascade == (0.5, 2.0 / 3.0)
        assert p.attenuation_db_per_km == 0.2
        assert p.attenuation_exponent == pytest.approx(0.02)
        assert p.overlap_convention == "trace"

    @pytest.mark.parametrize("tau", [(0.0, 1, 1), (1.2, 1, 1), (1, 1, -0.5)])
    def test_rejects_bad_tau(self, tau):
        with pytest.raises(ValueError, match="tau"):
            ProtocolParams(tau=tau)

    def test_rejects_bad_sigma(self):
        with pytest.raises(ValueError, match="sigma"):
            ProtocolParams(tau=(1, 1, 1), sigma=(1.0, 0.0, 1.0))

    def test_cascade_is_fixed(self):
        with pytest.raises(ValueError, match="cascade"):
            ProtocolParams(tau=(1, 1, 1), cascade=(0.4, 0.6))

    def test_rejects_unknown_convention(self):
        with pytest.raises(ValueError, match="convention"):
            ProtocolParams(tau=(1, 1, 1), overlap_convention="fidelity")

    def test_at_distance(self):
        p = ProtocolParams(tau=(1.0, 1.0, 1.0)).at_distance(50.0)
        assert p.tau == (pytest.approx(0.1), pytest.approx(0.1), pytest.approx(0.1))


class TestTransmissivityFromDistance:
    def test_zero_distance(self):
        assert transmissivity_from_distance(0.0) == 1.0

    def test_fifty_km(self):
        assert transmissivity_from_distance(50.0, 0.02) == pytest.approx(0.1, rel=1e-14)

    def test_three_km(self):
        assert transmissivity_from_distance(3.0, 0.02) == pytest.approx(
            10.0 ** (-0.06), rel=1e-14)
        assert transmissivity_from_distance(3.0, 0.02) == pytest.approx(0.8710, abs=5e-5)

    def test_rejects_negative_distance(self):
        with pytest.raises(ValueError, match="distance"):
            transmissivity_from_distance(-1.0)


class TestMeanCoefficients:
    def test_unit_transmissivity_is_balanced(self):
        w = mean_coefficients(ProtocolParams(tau=(1.0, 1.0, 1.0)))
        assert np.allclose(w, 1.0 / math.sqrt(3.0), atol=1e-15)

    def test_symmetric_configuration_is_balanced(self):
        for tau in (0.9, 0.5, 0.2):
            w = mean_coefficients(ProtocolParams(tau=(tau,) * 3))
            assert np.allclose(w, math.sqrt(tau / 3.0), atol=1e-15)

    def test_vanishing_transmissivity_decouples_party(self):
        w = mean_coefficients(ProtocolParams(tau=(1.0, 1.0, 1e-30)))
        assert w[2] == pytest.approx(0.0, abs=1e-12)


class TestOutcomeDensity:
    def test_zero_magnitudes_give_standard_normal(self):
        p = ProtocolParams(tau=(0.8, 0.9, 1.0))
        for gamma in (-1.3, 0.0, 2.4):
            got = outcome_density((1, -1, 1), (0, 0, 0), gamma, p)
            assert got == pytest.approx(normal_pdf(gamma), rel=1e-14)

    def test_peak_value(self):
        p = ProtocolParams(tau=(0.7, 0.7, 0.7))
        w = mean_coefficients(p)
        mags = (1.0, 2.0, 0.5)
        signs = (1, 1, -1)
        mean = float(np.dot(w, np.array(signs) * np.array(mags)))
        assert outcome_density(signs, mags, mean, p) == pytest.approx(
            1.0 / SQRT_2PI, rel=1e-14)

    def test_parity(self):
        rng = np.random.default_rng(11)
        p = random_params(rng)
        for _ in range(50):
            signs = rng.choice([-1.0, 1.0], 3)
            mags = np.abs(rng.normal(0, 1.5, 3))
            gamma = rng.normal(0, 2)
            assert outcome_density(signs, mags, gamma, p) == pytest.approx(
                outcome_density(-signs, mags, -gamma, p), rel=1e-13)

    def test_rejects_bad_signs(self):
        p = ProtocolParams(tau=(1, 1, 1))
        with pytest.raises(ValueError, match="signs"):
            outcome_density((1, 0, 1), (1, 1, 1), 0.0, p)


class TestJointDensity:
    def test_explicit_sum_at_zero_magnitudes(self):
        """All eight sign terms coincide at zero magnitudes."""
        p = ProtocolParams(tau=(0.9, 0.8, 0.7), sigma=(1.0, 1.0, 1.0))
        for gamma in (0.0, 1.0):
            want = 8.0 * normal_pdf(gamma) * normal_pdf(0.0) ** 3
            assert joint_density((0, 0, 0), gamma, p) == pytest.approx(want, rel=1e-13)

    def test_matches_term_by_term_sum(self):
        rng = np.random.default_rng(12)
        p = random_params(rng)
        mags = np.abs(rng.normal(0, 1.5, 3))
        gamma = rng.normal(0, 2)
        want = sum(
            outcome_density(signs, mags, gamma, p)
            * np.prod([normal_pdf(m, 0.0, s) for m, s in zip(mags, p.sigma)])
            for signs in SIGN_PATTERNS
        )
        assert joint_density(mags, gamma, p) == pytest.approx(want, rel=1e-12)

    def test_even_in_gamma_and_positive(self):
        rng = np.random.default_rng(13)
        p = random_params(rng)
        for _ in range(20):
            mags = np.abs(rng.normal(0, 1.5, 3))
            gamma = rng.normal(0, 2)
            value = joint_density(mags, gamma, p)
            assert value > 0.0
            assert value == pytest.approx(joint_density(mags, -gamma, p), rel=1e-12)

    def test_normalisation(self):
        """Integrates to 1 over the truncated announcement domain."""
        p = ProtocolParams(tau=(0.8, 0.95, 0.6), sigma=(1.0, 0.7, 1.3))
        n_mag, n_gam = 48, 200
        axes = [np.linspace(0, 8 * s, n_mag + 1) for s in p.sigma]
        g_hi = float(mean_coefficients(p) @ (8.0 * np.asarray(p.sigma))) + 8.0
        gammas = np.linspace(-g_hi, g_hi, n_gam + 1)

        w = mean_coefficients(p)
        sigma = np.asarray(p.sigma)
        m1, m2, m3 = np.meshgrid(*axes, indexing="ij")
        mags = np.stack([m1.ravel(), m2.ravel(), m3.ravel()], axis=1)
        mag_pdf = np.prod(np.exp(-0.5 * (mags / sigma) ** 2) / (SQRT_2PI * sigma), axis=1)
        means = (mags * w) @ SIGN_PATTERNS.T
        per_gamma = np.empty(gammas.size)
        for k, g in enumerate(gammas):
            lik = np.exp(-0.5 * (g - means) ** 2).sum(axis=1) / SQRT_2PI
            vals = (lik * mag_pdf).reshape(m1.shape)
            for nodes in axes:
                vals = np.trapezoid(vals, nodes, axis=0)
            per_gamma[k] = vals
        total = np.trapezoid(per_gamma, gammas)
        assert total == pytest.approx(1.0, abs=1e-4)


class TestEveConditionalMeans:
    def test_unit_transmissivity_leaks_nothing(self):
        p = ProtocolParams(tau=(1.0, 1.0, 1.0))
        means = eve_conditional_means((1, -1, 1), (2.0, 3.0, 1.0), p)
        assert np.allclose(means, 0.0, atol=1e-15)

    def test_half_tap_displacement(self):
        p = ProtocolParams(tau=(0.5, 1.0, 1.0))
        means = eve_conditional_means((1, 1, 1), (1.0, 0.0, 0.0), p)
        assert means[0][1] == pytest.approx(math.sqrt(0.5), rel=1e-14)
        assert means[0][0] == 0.0

    def test_sign_flip_negates_only_that_mode(self):
        p = ProtocolParams(tau=(0.5, 0.7, 0.9))
        mags = (1.0, 2.0, 0.5)
        base = eve_conditional_means((1, -1, 1), mags, p)
        flipped = eve_conditional_means((-1, -1, 1), mags, p)
        assert flipped[0][1] == pytest.approx(-base[0][1], rel=1e-14)
        assert flipped[1] == base[1]
        assert flipped[2] == base[2]

    def test_config2_uses_q_quadrature(self):
        p = ProtocolParams(tau=(0.5, 1.0, 1.0), detector_config="config2")
        means = eve_conditional_means((1, 1, 1), (1.0, 0.0, 0.0), p)
        assert means[0][0] == pytest.approx(math.sqrt(0.5), rel=1e-14)
        assert means[0][1] == 0.0


class TestSimulateRelay:
    def test_no_loss_leaves_eve_with_vacuum(self):
        rng = np.random.default_rng(14)
        p = ProtocolParams(tau=(1.0, 1.0, 1.0))
        for _ in range(10):
            result = simulate_relay(
                rng.choice([-1.0, 1.0], 3),
                np.abs(rng.normal(0, 1, 3)),
                np.abs(rng.normal(0, 1, 3)),
                p,
                rng.normal(0, 1, 3),
            )
            assert np.allclose(result.eve_state.mean, 0.0, atol=1e-14)
            assert np.allclose(result.eve_state.cov, np.eye(6), atol=1e-14)

    def test_marginal_matches_analytic_density(self):
        """The pipeline is the oracle for the outcome density."""
        rng = np.random.default_rng(15)
        for _ in range(300):
            p = random_params(rng)
            signs = rng.choice([-1.0, 1.0], 3)
            p_mags = np.abs(rng.normal(0, p.sigma))
            q_mags = np.abs(rng.normal(0, p.sigma))
            gamma = rng.normal(0, 2)
            result = simulate_relay(signs, q_mags, p_mags, p,
                                    (rng.normal(), rng.normal(), gamma))
            want = outcome_density(signs, p_mags, gamma, p)
            assert result.reconciled_likelihood == pytest.approx(want, rel=1e-10)

    def test_eve_state_properties(self):
        rng = np.random.default_rng(16)
        for _ in range(100):
            p = random_params(rng)
            signs = rng.choice([-1.0, 1.0], 3)
            p_mags = np.abs(rng.normal(0, p.sigma))
            q_mags = np.abs(rng.normal(0, p.sigma))
            result = simulate_relay(signs, q_mags, p_mags, p, rng.normal(0, 1, 3))
            eve = result.eve_state
            assert np.max(np.abs(eve.cov - np.eye(6))) <= 1e-12
            for mode, (_, want_p) in enumerate(eve_conditional_means(signs, p_mags, p)):
                assert abs(eve.mean[2 * mode + 1] - want_p) <= 1e-12

    def test_eve_state_independent_of_outcomes(self):
        p = ProtocolParams(tau=(0.6, 0.7, 0.8))
        signs = (1.0, -1.0, 1.0)
        q_mags, p_mags = (0.4, 1.1, 0.2), (0.9, 0.3, 1.5)
        a = simulate_relay(signs, q_mags, p_mags, p, (0.0, 0.0, 0.0))
        b = simulate_relay(signs, q_mags, p_mags, p, (1.7, -2.2, 0.9))
        assert np.allclose(a.eve_state.mean, b.eve_state.mean, atol=1e-13)
        assert np.allclose(a.eve_state.cov, b.eve_state.cov, atol=1e-13)

    def test_config2_reconciles_q_signs(self):
        p1 = ProtocolParams(tau=(0.7, 0.8, 0.9), detector_config="config2")
        signs = (-1.0, 1.0, 1.0)
        q_mags, p_mags = (1.2, 0.5, 0.8), (0.3, 0.9, 0.1)
        gamma = 0.6
        result = simulate_relay(signs, q_mags, p_mags, p1, (0.1, -0.4, gamma))
        want = outcome_density(signs, q_mags, gamma, p1)
        assert result.reconciled_likelihood == pytest.approx(want, rel=1e-10)

    def test_joint_likelihood_factorises(self):
        p = ProtocolParams(tau=(0.6, 0.9, 0.75))
        result = simulate_relay((1, 1, -1), (0.2, 0.4, 0.6), (1.0, 0.5, 0.3),
                                p, (0.3, -0.8, 1.1))
        assert result.joint_likelihood == pytest.approx(
            np.prod(result.likelihoods), rel=1e-14)

    def test_permutation_symmetry_of_reconciled_density(self):
        """Symmetric params: permuting parties with their data changes nothing."""
        p = ProtocolParams(tau=(0.8, 0.8, 0.8), sigma=(1.2, 1.2, 1.2))
        mags = np.array([0.7, 1.4, 0.2])
        signs = np.array([1.0, -1.0, 1.0])
        base = outcome_density(signs, mags, 0.9, p)
        for perm in ([1, 0, 2], [2, 1, 0], [1, 2, 0]):
            assert outcome_density(signs[perm], mags[perm], 0.9, p) == pytest.approx(
                base, rel=1e-13)
