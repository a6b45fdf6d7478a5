r"""Bayesian sign posteriors and the single-point mutual information.

Given the announced magnitudes and the reconciled homodyne outcome, the
eight sign triples are a priori equally likely, so their posterior is the
normalised vector of Gaussian outcome likelihoods.  All marginal and
conditional sign probabilities, and the pairwise single-point mutual
information, derive from that eight-entry table.

Likelihoods are always formed in log space and shifted by their maximum
before exponentiation, so extreme announcements never produce 0/0.

Scalar functions operate on one announcement; the ``*_batch`` variants
are the vectorised equivalents used by the Monte-Carlo rate engine and
accept arrays with a leading sample axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .protocol import SIGN_PATTERNS, ProtocolParams, mean_coefficients, _check_mags

__all__ = [
    "PosteriorTable",
    "sign_posterior_table",
    "posterior_table_batch",
    "single_marginal",
    "pair_conditional",
    "binary_entropy",
    "single_point_mi",
    "single_point_mi_batch",
]

_PARTIES = {"A": 0, "B": 1, "C": 2, 0: 0, 1: 1, 2: 2}

# Boolean masks over the table order: row t has party x positive iff
# _POSITIVE[x][t].
_POSITIVE = [SIGN_PATTERNS[:, x] > 0 for x in range(3)]

_ENTROPY_CLAMP = 1e-12


def _party_index(party) -> int:
    try:
        return _PARTIES[party]
    except KeyError:
        raise ValueError(f"unknown party {party!r}; use 'A', 'B' or 'C'") from None


@dataclass(frozen=True)
class PosteriorTable:
    """Posterior probabilities of the eight sign triples.

    ``probs[t]`` is the probability of ``SIGN_PATTERNS[t]`` given the
    announced magnitudes and the reconciled outcome; the order runs
    (---, --+, -+-, -++, +--, +-+, ++-, +++).
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (8,):
            raise ValueError("a posterior table has exactly eight entries")
        if np.any(p < 0.0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("posterior entries must be non-negative and sum to 1")
        object.__setattr__(self, "probs", p)


def posterior_table_batch(mags: np.ndarray, gamma: np.ndarray,
                          params: ProtocolParams) -> np.ndarray:
    """Posterior tables for a batch of announcements.

    Parameters
    ----------
    mags : ndarray, shape (n, 3)
    gamma : ndarray, shape (n,)
    params : ProtocolParams

    Returns
    -------
    ndarray, shape (n, 8)
    """
    w = mean_coefficients(params)
    means = (np.asarray(mags) * w) @ SIGN_PATTERNS.T           # (n, 8)
    loglik = -0.5 * (np.asarray(gamma)[:, None] - means) ** 2
    loglik -= loglik.max(axis=1, keepdims=True)
    table = np.exp(loglik)
    table /= table.sum(axis=1, keepdims=True)
    return table


def sign_posterior_table(mags, gamma: float, params: ProtocolParams) -> PosteriorTable:
    """Posterior over the eight sign triples for one announcement."""
    m = _check_mags(mags)
    probs = posterior_table_batch(m[None, :], np.atleast_1d(float(gamma)), params)[0]
    return PosteriorTable(probs)


def single_marginal(table: PosteriorTable, party) -> float:
    """Posterior probability that one party's sign is +1."""
    return float(table.probs[_POSITIVE[_party_index(party)]].sum())


def pair_conditional(table: PosteriorTable, target, given, given_sign: int) -> float:
    """Posterior probability of target sign +1 given another party's sign.

    A conditioning event of probability zero returns 1/2: in the mutual
    information it is weighted by that zero probability, so the value is
    immaterial, and 1/2 keeps the entropy finite.
    """
    if given_sign not in (-1, 1):
        raise ValueError("given_sign must be -1 or +1")
    t = _party_index(target)
    g = _party_index(given)
    g_mask = _POSITIVE[g] if given_sign == 1 else ~_POSITIVE[g]
    marginal = table.probs[g_mask].sum()
    if marginal == 0.0:
        return 0.5
    return float(table.probs[g_mask & _POSITIVE[t]].sum() / marginal)


def binary_entropy(p: float) -> float:
    """Binary entropy in bits, with 0*log(0) taken as 0.

    Probabilities within 1e-12 of 0 or 1 are clamped before the logarithm
    (a floating-point guard costing at most ~4e-11 bits); values outside
    [0, 1] beyond that tolerance are rejected.
    """
    if p < -_ENTROPY_CLAMP or p > 1.0 + _ENTROPY_CLAMP:
        raise ValueError("probability must lie in [0, 1]")
    p = min(max(p, 0.0), 1.0)
    if p <= _ENTROPY_CLAMP or p >= 1.0 - _ENTROPY_CLAMP:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def single_point_mi(mags, gamma: float, params: ProtocolParams,
                    pair=("A", "B")) -> float:
    """Mutual information between two parties' signs given one announcement.

    Implements H(k_i | announced) - sum_s p(k_j = s) H(k_i | k_j = s)
    in bits.  The exact value lies in [0, 1]; the return is clipped to
    that interval to absorb float rounding.
    """
    table = sign_posterior_table(mags, gamma, params)
    i, j = pair
    h_marg = binary_entropy(single_marginal(table, i))
    h_cond = 0.0
    for sign in (1, -1):
        weight = single_marginal(table, j)
        if sign == -1:
            weight = 1.0 - weight
        h_cond += weight * binary_entropy(pair_conditional(table, i, j, sign))
    return min(1.0, max(0.0, h_marg - h_cond))


def _binary_entropy_arr(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 0.0, 1.0)
    inner = (p > _ENTROPY_CLAMP) & (p < 1.0 - _ENTROPY_CLAMP)
    safe = np.where(inner, p, 0.5)
    h = -(safe * np.log2(safe) + (1.0 - safe) * np.log2(1.0 - safe))
    return np.where(inner, h, 0.0)


def single_point_mi_batch(tables: np.ndarray, pair=("A", "B")) -> np.ndarray:
    """Vectorised :func:`single_point_mi` over precomputed posterior tables."""
    i = _party_index(pair[0])
    j = _party_index(pair[1])
    p_i = tables[:, _POSITIVE[i]].sum(axis=1)
    mi = _binary_entropy_arr(p_i)
    for sign in (1, -1):
        j_mask = _POSITIVE[j] if sign == 1 else ~_POSITIVE[j]
        weight = tables[:, j_mask].sum(axis=1)
        joint = tables[:, j_mask & _POSITIVE[i]].sum(axis=1)
        cond = np.where(weight > 0.0, joint / np.where(weight > 0.0, weight, 1.0), 0.5)
        mi -= weight * _binary_entropy_arr(cond)
    return np.clip(mi, 0.0, 1.0)
