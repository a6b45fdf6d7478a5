r"""Fixed structure of the three-party relay protocol.

Three parties prepare Gaussian-modulated coherent states whose quadrature
signs carry the raw key material and whose magnitudes are announced.  Each
channel suffers pure loss (an eavesdropper beamsplitter of transmissivity
tau_i); the surviving modes are combined in a two-beamsplitter cascade
(T1 = 1/2 between A and B, then T2 = 2/3 with C) and homodyned.  In the
first detector configuration the cascade's sum port is measured in p and
the parties reconcile the p-quadrature signs; the second configuration is
the q/p mirror image.

This module provides the analytic outcome densities for the reconciled
homodyne result together with a full phase-space pipeline built on
:mod:`cvconf.gaussian` that serves as their independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .gaussian import GaussianState, homodyne_condition, apply_beamsplitter, \
    make_coherent_product, pure_loss_tap

__all__ = [
    "CASCADE_T1",
    "CASCADE_T2",
    "SIGN_PATTERNS",
    "ProtocolParams",
    "RelayResult",
    "transmissivity_from_distance",
    "mean_coefficients",
    "outcome_density",
    "joint_density",
    "eve_conditional_means",
    "simulate_relay",
]

# Cascade transmissivities T_i = i/(i+1) for three parties.
CASCADE_T1 = 0.5
CASCADE_T2 = 2.0 / 3.0

# All eight sign triples (A, B, C), ordered with A as the most significant
# bit and -1 before +1:  (---, --+, -+-, -++, +--, +-+, ++-, +++).
# This ordering indexes posterior tables and the overlap-matrix basis.
SIGN_PATTERNS = np.array(
    [[2 * ((t >> 2) & 1) - 1, 2 * ((t >> 1) & 1) - 1, 2 * (t & 1) - 1]
     for t in range(8)],
    dtype=float,
)

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ProtocolParams:
    """Everything that determines the protocol's densities.

    Attributes
    ----------
    tau : (float, float, float)
        Channel transmissivities for parties A, B, C, each in (0, 1].
    sigma : (float, float, float)
        Modulation standard deviations (shot-noise units), each > 0.
    cascade : (float, float)
        Detector beamsplitter transmissivities; fixed to (1/2, 2/3).
    attenuation_db_per_km : float
        Fibre loss; tau = 10**(-d * attenuation_db_per_km / 10).
    overlap_convention : {"trace", "amplitude"}
        Whether the eavesdropper's pairwise state overlap is taken as the
        two-state trace formula or its square root; see
        :func:`cvconf.holevo.eve_overlaps`.
    detector_config : {"config1", "config2"}
        config1 reconciles p-quadrature signs (two q-homodynes plus a
        final p-homodyne); config2 is the mirror image.
    """

    tau: tuple[float, float, float]
    sigma: tuple[float, float, float] = (1.0, 1.0, 1.0)
    cascade: tuple[float, float] = (CASCADE_T1, CASCADE_T2)
    attenuation_db_per_km: float = 0.2
    overlap_convention: str = "trace"
    detector_config: str = "config1"

    def __post_init__(self):
        tau = tuple(float(t) for t in self.tau)
        sigma = tuple(float(s) for s in self.sigma)
        cascade = tuple(float(t) for t in self.cascade)
        if len(tau) != 3 or not all(0.0 < t <= 1.0 for t in tau):
            raise ValueError("tau must be three transmissivities in (0, 1]")
        if len(sigma) != 3 or not all(s > 0.0 for s in sigma):
            raise ValueError("sigma must be three positive standard deviations")
        if cascade != (CASCADE_T1, CASCADE_T2):
            raise ValueError("cascade transmissivities are fixed to (1/2, 2/3)")
        if self.attenuation_db_per_km < 0.0:
            raise ValueError("attenuation_db_per_km must be non-negative")
        if self.overlap_convention not in ("trace", "amplitude"):
            raise ValueError("overlap_convention must be 'trace' or 'amplitude'")
        if self.detector_config not in ("config1", "config2"):
            raise ValueError("detector_config must be 'config1' or 'config2'")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "cascade", cascade)

    @property
    def attenuation_exponent(self) -> float:
        """Per-km exponent g in tau = 10**(-g*d); equals dB/km divided by 10."""
        return self.attenuation_db_per_km / 10.0

    def at_distance(self, distance_km: float) -> "ProtocolParams":
        """Symmetric configuration at the given relay distance."""
        t = transmissivity_from_distance(distance_km, self.attenuation_exponent)
        return replace(self, tau=(t, t, t))


@dataclass(frozen=True)
class RelayResult:
    """Outcome of one phase-space run of the relay pipeline."""

    joint_likelihood: float
    likelihoods: tuple[float, float, float]
    eve_state: GaussianState

    @property
    def reconciled_likelihood(self) -> float:
        """Density of the reconciled-quadrature outcome (the final homodyne)."""
        return self.likelihoods[2]


def transmissivity_from_distance(distance_km: float, attenuation_exponent: float = 0.02) -> float:
    """Map a fibre length to a transmissivity via tau = 10**(-g*d)."""
    if distance_km < 0.0:
        raise ValueError("distance must be non-negative")
    return 10.0 ** (-attenuation_exponent * distance_km)


def mean_coefficients(params: ProtocolParams) -> np.ndarray:
    """Coefficients (w_A, w_B, w_C) of sign_i*mag_i in the reconciled outcome mean.

    w_A = sqrt(T1*T2*tau_A), w_B = sqrt((1-T1)*T2*tau_B),
    w_C = sqrt((1-T2)*tau_C).  For equal tau the three are equal, which is
    what makes the symmetric configuration exactly balanced.
    """
    t1, t2 = params.cascade
    ta, tb, tc = params.tau
    return np.array([
        math.sqrt(t1 * t2 * ta),
        math.sqrt((1.0 - t1) * t2 * tb),
        math.sqrt((1.0 - t2) * tc),
    ])


def _check_signs(signs) -> np.ndarray:
    s = np.asarray(signs, dtype=float)
    if s.shape != (3,) or not np.all(np.abs(s) == 1.0):
        raise ValueError("signs must be three values in {-1, +1}")
    return s


def _check_mags(mags) -> np.ndarray:
    m = np.asarray(mags, dtype=float)
    if m.shape != (3,) or not np.all(m >= 0.0) or not np.all(np.isfinite(m)):
        raise ValueError("magnitudes must be three finite non-negative reals")
    return m


def outcome_density(signs, mags, gamma: float, params: ProtocolParams) -> float:
    """Density of the reconciled homodyne outcome given signs and magnitudes.

    A unit-variance normal centred on sum_i w_i * sign_i * mag_i; the unit
    conditional variance is what pure loss plus perfect homodyne detection
    produce in shot-noise units (verified against :func:`simulate_relay`).
    """
    s = _check_signs(signs)
    m = _check_mags(mags)
    mean = float(np.dot(mean_coefficients(params), s * m))
    return math.exp(-0.5 * (gamma - mean) ** 2) / _SQRT_2PI


def joint_density(mags, gamma: float, params: ProtocolParams) -> float:
    """Joint density of the announced magnitudes and the reconciled outcome.

    Sums the outcome density over the eight equally-likely sign triples,
    weighting each party by its sign-magnitude density: a zero-mean normal
    of deviation sigma_i evaluated at mag_i (equivalently, the half sign
    probability times the half-normal magnitude density).
    """
    m = _check_mags(mags)
    w = mean_coefficients(params)
    sigma = np.asarray(params.sigma)
    means = SIGN_PATTERNS @ (w * m)
    lik = np.exp(-0.5 * (gamma - means) ** 2).sum() / _SQRT_2PI
    mag_density = np.prod(np.exp(-0.5 * (m / sigma) ** 2) / (_SQRT_2PI * sigma))
    return float(lik * mag_density)


def eve_conditional_means(signs, mags, params: ProtocolParams) -> list[tuple[float, float]]:
    """Means (q, p) of the eavesdropper's three memory modes.

    Mode i carries mean sqrt(1-tau_i)*sign_i*mag_i on the reconciled
    quadrature.  The orthogonal quadrature mean is irrelevant to the state
    overlaps and is reported as 0; the covariance is the identity.
    """
    s = _check_signs(signs)
    m = _check_mags(mags)
    out = []
    for ti, si, mi in zip(params.tau, s, m):
        disp = math.sqrt(1.0 - ti) * si * mi
        if params.detector_config == "config1":
            out.append((0.0, disp))
        else:
            out.append((disp, 0.0))
    return out


def simulate_relay(signs, q_mags, p_mags, params: ProtocolParams,
                   outcomes) -> RelayResult:
    """Run the full phase-space pipeline for one protocol instance.

    Builds the three-mode coherent product, taps each mode with pure loss,
    applies the detector cascade and conditions on the three homodyne
    outcomes in measurement order.  ``signs`` are the reconciled-quadrature
    signs (p-signs in config1, q-signs in config2); the orthogonal
    quadrature signs are fixed to +1, which affects neither the reconciled
    outcome's distribution nor the eavesdropper's reconciled-quadrature
    means.

    Parameters
    ----------
    signs : three values in {-1, +1}
    q_mags, p_mags : three non-negative quadrature magnitudes
    params : ProtocolParams
    outcomes : three homodyne results in measurement order
        (relative-AB port, relative-ABC port, sum port); the first two are
        q-homodynes and the last a p-homodyne in config1, mirrored in
        config2.

    Returns
    -------
    RelayResult
        Joint outcome likelihood, the per-measurement likelihoods, and the
        eavesdropper's conditioned three-mode state (modes A, B, C).
    """
    s = _check_signs(signs)
    qm = _check_mags(q_mags)
    pm = _check_mags(p_mags)
    outs = np.asarray(outcomes, dtype=float)
    if outs.shape != (3,):
        raise ValueError("outcomes must be three homodyne results")

    if params.detector_config == "config1":
        means = [(qm[i], s[i] * pm[i]) for i in range(3)]
        quads = ("q", "q", "p")
    else:
        means = [(s[i] * qm[i], pm[i]) for i in range(3)]
        quads = ("p", "p", "q")

    state = make_coherent_product(means)
    for i, ti in enumerate(params.tau):
        state = pure_loss_tap(state, i, ti)  # appends Eve modes 3, 4, 5
    t1, t2 = params.cascade
    state = apply_beamsplitter(state, 0, 1, t1)
    state = apply_beamsplitter(state, 0, 2, t2)

    # Measure the two relative ports then the sum port; indices shift as
    # measured modes are removed (1 -> old 2, final 0 -> sum port).
    liks = []
    state, lik = homodyne_condition(state, 1, quads[0], outs[0])
    liks.append(lik)
    state, lik = homodyne_condition(state, 1, quads[1], outs[1])
    liks.append(lik)
    state, lik = homodyne_condition(state, 0, quads[2], outs[2])
    liks.append(lik)

    return RelayResult(
        joint_likelihood=float(np.prod(liks)),
        likelihoods=tuple(liks),
        eve_state=state,
    )
