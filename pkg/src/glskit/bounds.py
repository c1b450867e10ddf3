"""Closed-form matching-probability bounds.

All functions are exact evaluations (no Monte Carlo).  Terms whose
denominator involves a zero probability contribute their limit value 0.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .coupling import as_probs, tv_distance, _same_alphabet
from .errors import DegenerateMass, InvalidActiveCount


class BoundKind(str, enum.Enum):
    LML = "lml"
    LML_CONDITIONAL = "lml_conditional"
    LML_RELAXED = "lml_relaxed"
    MAXIMAL_COUPLING = "maximal_coupling"
    WEAK_COUPLING = "weak_coupling"
    CONDITIONAL_LML = "conditional_lml"
    WZ_ERROR = "wz_error"
    STRONG_VARIANT = "strong_variant"


@dataclass(frozen=True)
class BoundReport:
    value: float
    kind: BoundKind

    def __post_init__(self):
        if not -1e-12 <= self.value <= 1 + 1e-12:
            raise ValueError(f"bound value {self.value} outside [0, 1]")


def _lml_denominators(p, q, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-``j`` denominators ``sum_i max(q_i/q_j, p_i/p_j) + (K-1) q_i/q_j``.

    Returns ``(denom, valid)``; entries with ``p_j == 0`` or ``q_j == 0`` are
    flagged invalid and their value is meaningless.
    """
    p, q = as_probs(p), as_probs(q)
    _same_alphabet(p, q)
    if K < 1:
        raise ValueError("K must be >= 1")
    valid = (p > 0) & (q > 0)
    pj = np.where(valid, p, 1.0)
    qj = np.where(valid, q, 1.0)
    rq = q[None, :] / qj[:, None]  # [j, i] = q_i / q_j
    rp = p[None, :] / pj[:, None]
    denom = np.maximum(rq, rp).sum(axis=1)
    if K > 1:  # skip 0 * inf when a tiny q_j overflows the ratios
        denom = denom + (K - 1) * rq.sum(axis=1)
    return denom, valid


def lml_bound(p, q, K: int) -> float:
    """List matching lower bound on ``Pr[Y in {X_1..X_K}]`` for GLS."""
    denom, valid = _lml_denominators(p, q, K)
    return float(np.sum(np.where(valid, K / denom, 0.0)))


def strong_variant_accept_bound(p, q, K: int, J: int) -> float:
    """Acceptance bound when ``J`` of ``K`` coupled drafts are still active.

    Same denominator as :func:`lml_bound`, numerator ``J`` instead of ``K``.
    """
    if not 1 <= J <= K:
        raise InvalidActiveCount(f"need 1 <= J <= K, got J={J}, K={K}")
    denom, valid = _lml_denominators(p, q, K)
    return float(np.sum(np.where(valid, J / denom, 0.0)))


def lml_conditional_bound(p_j: float, q_j: float, K: int) -> float:
    """Lower bound on the match probability given ``Y = j``."""
    if p_j <= 0:
        raise DegenerateMass("p_j must be positive")
    if q_j <= 0:
        raise DegenerateMass("q_j must be positive")
    return 1.0 / (1.0 + q_j / (K * p_j))


def lml_relaxed_bound(p, q, K: int) -> float:
    """``sum_j q_j (1 + q_j / (K p_j))^-1`` over the common support."""
    p, q = as_probs(p), as_probs(q)
    _same_alphabet(p, q)
    valid = (p > 0) & (q > 0)
    ps = np.where(valid, p, 1.0)
    return float(np.sum(np.where(valid, q / (1.0 + q / (K * ps)), 0.0)))


def maximal_coupling_prob(p, q) -> float:
    return 1.0 - tv_distance(p, q)


def weak_coupling_bound(p, q) -> float:
    """Single-proposal Gumbel coupling guarantee ``(1 - TV) / (1 + TV)``."""
    tv = tv_distance(p, q)
    return (1.0 - tv) / (1.0 + tv)


def conditional_lml_bound(q_j_a: float, p_j_z) -> float:
    """``sum_k (K + q_j(a) / p_j(z_k))^-1`` for the conditional scheme."""
    p = np.atleast_1d(np.asarray(p_j_z, dtype=np.float64))
    if q_j_a <= 0 or np.any(p <= 0):
        raise DegenerateMass("conditional masses must be positive")
    K = p.size
    return float(np.sum(1.0 / (K + q_j_a / p)))


def wz_error_bound(model, K: int, L_max: int) -> float:
    """Upper bound on ``Pr[Y not in {X_1..X_K}]`` for the discrete coding scheme.

    ``1 - E[(1 + 2^i(W;A|T) / (K L_max))^-1]`` with the expectation summed
    exactly over the finite joint law of ``(A, W, T)``.  ``model`` is a
    :class:`glskit.wz.DiscreteWZModel` (duck-typed: needs ``p_a``,
    ``p_t_given_a``, ``p_w_given_a`` and ``p_w_given_t``).
    """
    pa = model.p_a
    pta = model.p_t_given_a  # [a, t]
    pwa = model.p_w_given_a  # [a, w]
    pwt = model.p_w_given_t  # [t, w]
    joint = pa[:, None, None] * pwa[:, :, None] * pta[:, None, :]  # [a, w, t]
    ratio_den = np.broadcast_to(pwt.T[None, :, :], joint.shape)
    num = np.broadcast_to(pwa[:, :, None], joint.shape)
    live = joint > 0
    dens = np.ones_like(joint)
    np.divide(num, ratio_den, out=dens, where=live)  # 2**i = p(w|a) / p(w|t)
    term = np.where(live, joint / (1.0 + dens / (K * L_max)), 0.0)
    return float(min(1.0, max(0.0, 1.0 - term.sum())))
