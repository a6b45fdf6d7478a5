r"""The eavesdropper's states and the single-point Holevo information.

Under pure loss the eavesdropper holds, per party, one of two coherent
states whose sign follows the party's reconciled-quadrature sign.  Her
three-mode conditional states are pure products, so each party's pair
spans a two-dimensional space {Phi_0, Phi_1} in which the states read
c0*Phi_0 +/- c1*Phi_1 with c0^2 = (1+X)/2, c1^2 = (1-X)/2 for pairwise
overlap X.  Mixing the eight of them with the sign posterior gives an
8x8 real density matrix whose entries factor into coefficient products
times posterior-weighted parity sums; conditioning on one party's sign
leaves a 4x4 matrix over the other two (the conditioned party's pure
factor carries no entropy).

An independent route to the same spectra is the Gram construction: the
nonzero spectrum of a mixture of pure states equals that of the overlap
matrix weighted by the square roots of the mixture probabilities.  The
two routes share no code path and cross-validate each other.

The pairwise overlap itself is convention-dependent: ``trace`` uses the
two-state trace formula exp(-(1-tau)*mag^2) directly, ``amplitude`` its
square root (the literal inner product of the pure states).  ``trace``
is the default; it yields smaller overlaps, hence a larger Holevo bound
and a more conservative key rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .inference import PosteriorTable, _party_index, sign_posterior_table, single_marginal
from .protocol import SIGN_PATTERNS, ProtocolParams, _check_mags

__all__ = [
    "EveDensityMatrix",
    "eve_overlaps",
    "eve_overlaps_batch",
    "coefficient_moduli",
    "assemble_total_state",
    "assemble_conditional_state",
    "von_neumann_entropy",
    "gram_oracle_entropy",
    "single_point_holevo",
    "single_point_holevo_batch",
]

_EIG_FLOOR = 1e-12

# Sign bits per table row (1 for +1), A most significant.
_BITS8 = ((SIGN_PATTERNS + 1.0) / 2.0)                       # (8, 3)
_BITS4 = np.array([[(t >> 1) & 1, t & 1] for t in range(4)], dtype=float)

# Parity tensors behind the posterior-weighted sums: PAR[r, c, t] is the
# sign (-1)^(sum_x f(sign_x_t) * |bit_x_r - bit_x_c|) with f(-1)=0, f(+1)=1.
_PAR8 = (-1.0) ** np.einsum("rcx,tx->rct", np.abs(_BITS8[:, None, :] - _BITS8[None, :, :]), _BITS8)
_PAR4 = (-1.0) ** np.einsum("rcx,tx->rct", np.abs(_BITS4[:, None, :] - _BITS4[None, :, :]), _BITS4)

# Full-table indices, per conditioned party and sign bit, of the four
# remaining-parties patterns in their own binary order.
_OTHER_PARTIES = ((1, 2), (0, 2), (0, 1))


def _conditional_index_map() -> np.ndarray:
    idx = np.empty((3, 2, 4), dtype=int)
    for x in range(3):
        for b in range(2):
            rows = []
            for t in range(8):
                bits = ((t >> 2) & 1, (t >> 1) & 1, t & 1)
                if bits[x] == b:
                    y, z = _OTHER_PARTIES[x]
                    rows.append((2 * bits[y] + bits[z], t))
            idx[x, b] = [t for _, t in sorted(rows)]
    return idx


_COND_IDX = _conditional_index_map()


@dataclass(frozen=True)
class EveDensityMatrix:
    """A real symmetric density matrix in the finite overlap basis.

    ``matrix`` is 8x8 for the total state (basis ordered by the binary
    string (i, j, k) over the three parties' {Phi_0, Phi_1} factors) or
    4x4 for a state conditioned on one party's sign.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (4, 8):
            raise ValueError("density matrix must be 4x4 or 8x8")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def validate(self, sym_tol: float = 1e-12, trace_tol: float = 1e-10,
                 psd_tol: float = 1e-10) -> None:
        """Raise ValueError unless symmetric, unit trace and PSD within tolerance."""
        m = self.matrix
        if np.max(np.abs(m - m.T)) > sym_tol:
            raise ValueError("density matrix is not symmetric")
        if abs(np.trace(m) - 1.0) > trace_tol:
            raise ValueError("density matrix trace differs from 1")
        if np.linalg.eigvalsh(m)[0] < -psd_tol:
            raise ValueError("density matrix has a negative eigenvalue")


def eve_overlaps(mags, params: ProtocolParams) -> np.ndarray:
    """Pairwise overlaps (X_A, X_B, X_C) of the eavesdropper's sign states.

    Party i's two conditional states differ only by the reconciled-
    quadrature mean gap 2*sqrt(1-tau_i)*mag_i, so the trace formula with
    identity covariance gives exp(-(1-tau_i)*mag_i**2); the amplitude
    convention takes the square root.  Independent of the relay outcome:
    the taps are uncorrelated with the detector given signs and
    magnitudes.
    """
    m = _check_mags(mags)
    exponent = (1.0 - np.asarray(params.tau)) * m ** 2
    if params.overlap_convention == "amplitude":
        exponent = exponent / 2.0
    return np.exp(-exponent)


def eve_overlaps_batch(mags: np.ndarray, params: ProtocolParams) -> np.ndarray:
    """Vectorised :func:`eve_overlaps` for (n, 3) magnitude arrays."""
    exponent = (1.0 - np.asarray(params.tau)) * np.asarray(mags) ** 2
    if params.overlap_convention == "amplitude":
        exponent = exponent / 2.0
    return np.exp(-exponent)


def coefficient_moduli(overlap: float) -> tuple[float, float]:
    """Expansion moduli (c0, c1) of the two sign states over {Phi_0, Phi_1}.

    c0 = sqrt((1+X)/2) and c1 = sqrt((1-X)/2), both real non-negative;
    X outside [0, 1] beyond 1e-12 is rejected, within it clamped.
    """
    if overlap < -1e-12 or overlap > 1.0 + 1e-12:
        raise ValueError("overlap must lie in [0, 1]")
    x = min(max(float(overlap), 0.0), 1.0)
    return math.sqrt((1.0 + x) / 2.0), math.sqrt((1.0 - x) / 2.0)


def _coefficient_vectors(overlaps: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """Products of per-party coefficients for every basis string.

    overlaps: (n, k); bits: (2^k, k).  Returns (n, 2^k) with entry
    [s, r] = prod_x c_{bits[r, x]}(overlaps[s, x]).
    """
    c0 = np.sqrt((1.0 + overlaps) / 2.0)
    c1 = np.sqrt((1.0 - overlaps) / 2.0)
    chosen = np.where(bits[None, :, :] == 1.0, c1[:, None, :], c0[:, None, :])
    return chosen.prod(axis=2)


def _assemble_batch(weights: np.ndarray, overlaps: np.ndarray,
                    bits: np.ndarray, parity: np.ndarray) -> np.ndarray:
    """Density matrices (n, d, d) from sign weights and overlaps."""
    cvec = _coefficient_vectors(overlaps, bits)
    lam = np.einsum("rct,nt->nrc", parity, weights)
    return cvec[:, :, None] * cvec[:, None, :] * lam


def assemble_total_state(table: PosteriorTable, overlaps) -> EveDensityMatrix:
    """The eavesdropper's total state mixed over all eight sign triples.

    Entry ((i,j,k), (i',j',k')) equals the coefficient product
    c_i c_i' c_j c_j' c_k c_k' times the posterior-weighted parity sum
    over sign triples; on the diagonal the sum collapses to 1, leaving
    the squared coefficient products.
    """
    x = np.asarray(overlaps, dtype=float)
    if x.shape != (3,):
        raise ValueError("need one overlap per party")
    rho = _assemble_batch(table.probs[None, :], x[None, :], _BITS8, _PAR8)[0]
    return EveDensityMatrix(rho)


def assemble_conditional_state(table: PosteriorTable, overlaps, party,
                               sign: int) -> EveDensityMatrix:
    """The two remaining parties' state given one party's sign.

    The conditioned party's own factor is pure and carries no entropy, so
    only the 4x4 factor over the other two parties (in A, B, C order) is
    returned.  A zero conditioning marginal falls back to the uniform
    conditional: it only ever enters the Holevo average with weight zero.
    """
    if sign not in (-1, 1):
        raise ValueError("sign must be -1 or +1")
    x_idx = _party_index(party)
    x = np.asarray(overlaps, dtype=float)
    if x.shape != (3,):
        raise ValueError("need one overlap per party")
    idx = _COND_IDX[x_idx, (sign + 1) // 2]
    weights = table.probs[idx]
    marginal = weights.sum()
    weights = weights / marginal if marginal > 0.0 else np.full(4, 0.25)
    rest = x[list(_OTHER_PARTIES[x_idx])]
    rho = _assemble_batch(weights[None, :], rest[None, :], _BITS4, _PAR4)[0]
    return EveDensityMatrix(rho)


def _entropy_of_eigenvalues(lam: np.ndarray) -> np.ndarray:
    """Shannon entropy in bits over the last axis, treating tiny values as 0."""
    lam = np.clip(lam, 0.0, None)
    safe = np.where(lam > _EIG_FLOOR, lam, 1.0)
    return -(safe * np.log2(safe)).sum(axis=-1) + 0.0  # +0.0 avoids -0.0


def von_neumann_entropy(rho) -> float:
    """Von Neumann entropy in bits of a real symmetric density matrix.

    Eigenvalues at or below 1e-12 contribute nothing; a trace or
    positivity violation beyond tolerance raises ValueError.
    """
    dm = rho if isinstance(rho, EveDensityMatrix) else EveDensityMatrix(np.asarray(rho))
    dm.validate()
    return float(_entropy_of_eigenvalues(np.linalg.eigvalsh(dm.matrix)))


def gram_oracle_entropy(weights, overlaps) -> float:
    """Mixture entropy via the weighted Gram matrix of the pure states.

    For rho = sum_m w_m |psi_m><psi_m| the nonzero spectrum equals that of
    G_mn = sqrt(w_m w_n) <psi_m|psi_n>, with the overlaps given by the
    tensor product of per-party 2x2 blocks [[1, X], [X, 1]].  Accepts
    eight weights with three overlaps, or four weights with two.
    """
    w = np.asarray(weights, dtype=float)
    x = np.atleast_1d(np.asarray(overlaps, dtype=float))
    if w.shape != (2 ** x.size,):
        raise ValueError("need 2**k weights for k overlaps")
    if abs(w.sum() - 1.0) > 1e-10 or np.any(w < 0.0):
        raise ValueError("weights must be a probability vector")
    gram = np.array([[1.0]])
    for xi in x:
        gram = np.kron(gram, np.array([[1.0, xi], [xi, 1.0]]))
    root = np.sqrt(w)
    gram = gram * np.outer(root, root)
    return float(_entropy_of_eigenvalues(np.linalg.eigvalsh(gram)))


def single_point_holevo(mags, gamma: float, params: ProtocolParams,
                        party="A") -> float:
    """Holevo information on one party's sign given one announcement.

    S(total) minus the posterior-weighted average of the two conditional
    entropies.  The exact value lies in [0, 1] bits; this is asserted
    (with 1e-9 slack for the eigensolver), never clamped.
    """
    table = sign_posterior_table(mags, gamma, params)
    overlaps = eve_overlaps(mags, params)
    total = von_neumann_entropy(assemble_total_state(table, overlaps))
    averaged = 0.0
    for sign in (1, -1):
        weight = single_marginal(table, party)
        if sign == -1:
            weight = 1.0 - weight
        cond = assemble_conditional_state(table, overlaps, party, sign)
        averaged += weight * von_neumann_entropy(cond)
    chi = total - averaged
    assert -1e-9 <= chi <= 1.0 + 1e-9, f"Holevo information {chi} outside [0, 1]"
    return chi


def single_point_holevo_batch(tables: np.ndarray, overlaps: np.ndarray,
                              party="A") -> np.ndarray:
    """Vectorised :func:`single_point_holevo` over posterior tables.

    Parameters
    ----------
    tables : ndarray, shape (n, 8)
    overlaps : ndarray, shape (n, 3)
    party : which party's sign the bound refers to
    """
    x_idx = _party_index(party)
    rho = _assemble_batch(tables, overlaps, _BITS8, _PAR8)
    total = _entropy_of_eigenvalues(np.linalg.eigvalsh(rho))

    rest = overlaps[:, list(_OTHER_PARTIES[x_idx])]
    averaged = np.zeros_like(total)
    for bit in (1, 0):
        weights = tables[:, _COND_IDX[x_idx, bit]]
        marginal = weights.sum(axis=1)
        safe = np.where(marginal > 0.0, marginal, 1.0)
        cond = np.where(marginal[:, None] > 0.0, weights / safe[:, None], 0.25)
        rho4 = _assemble_batch(cond, rest, _BITS4, _PAR4)
        averaged += marginal * _entropy_of_eigenvalues(np.linalg.eigvalsh(rho4))
    return total - averaged
