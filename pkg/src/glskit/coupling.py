"""Categorical distributions and coupled sampling rules.

Symbols are 0-based indices ``0..N-1``.  A race matrix holds one row of
Exp(1) variates per proposal; the target takes the minimum over rows, each
proposal uses its own row.  Scores ``s / p`` with ``p == 0`` are ``+inf`` and
ties go to the lowest index (``np.argmin`` semantics).

Besides the single-draw functions there are batch forms working on race
tensors of shape ``(trials, K, N)``; they are what the Monte Carlo harnesses
use, and the single-draw functions are thin wrappers around them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AlphabetMismatch, EmptySupport, NegativeMass, ZeroTotalMass
from .rng import SeedContext, exp_array, uniform_array

_NORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Categorical:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise EmptySupport("a categorical needs a non-empty 1-D probability vector")
        if np.any(p < 0):
            raise NegativeMass("negative probability mass")
        if not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite")
        if abs(p.sum() - 1.0) > _NORM_TOL:
            raise ValueError("probabilities must sum to 1; use make_categorical")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __len__(self):
        return self.probs.size

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __repr__(self):
        return f"Categorical({np.array2string(self.probs, precision=4)})"


def make_categorical(raw) -> Categorical:
    """Normalise a non-negative weight vector."""
    w = np.asarray(raw, dtype=np.float64)
    if np.any(w < 0):
        raise NegativeMass("negative probability mass")
    total = w.sum()
    if not total > 0:
        raise ZeroTotalMass("weights sum to zero")
    return Categorical(w / total)


def as_probs(d) -> np.ndarray:
    if isinstance(d, Categorical):
        return d.probs
    return np.asarray(d, dtype=np.float64)


def _same_alphabet(*dists) -> int:
    sizes = {as_probs(d).shape[-1] for d in dists}
    if len(sizes) != 1:
        raise AlphabetMismatch(f"alphabet sizes differ: {sorted(sizes)}")
    return sizes.pop()


def tv_distance(p, q) -> float:
    _same_alphabet(p, q)
    return 0.5 * float(np.abs(as_probs(p) - as_probs(q)).sum())


def truncate_top(q, m: int) -> Categorical:
    """Keep the ``m`` largest entries of ``q`` and renormalise (top-M sampling)."""
    q = as_probs(q)
    if m >= q.size:
        return make_categorical(q)
    keep = np.argsort(-q, kind="stable")[:m]
    out = np.zeros_like(q)
    out[keep] = q[keep]
    return make_categorical(out)


@dataclass(frozen=True)
class RaceMatrix:
    s: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=np.float64)
        if s.ndim != 2:
            raise ValueError("race matrix must be K x N")
        if not (np.all(np.isfinite(s)) and np.all(s > 0)):
            raise ValueError("race entries must be finite and positive")
        object.__setattr__(self, "s", s)

    @property
    def K(self):
        return self.s.shape[0]

    @property
    def N(self):
        return self.s.shape[1]


@dataclass(frozen=True)
class CoupleOutcome:
    y: int
    x: tuple[int, ...]

    @property
    def accepted(self) -> bool:
        return self.y in self.x


def build_races(seed: SeedContext, K: int, N: int) -> RaceMatrix:
    """Entry ``(k, i)`` is ``exp_variate(seed.child(k, i))``."""
    if K < 1 or N < 1:
        raise ValueError("K and N must be positive")
    return RaceMatrix(exp_array(seed, np.arange(K)[:, None], np.arange(N)[None, :]))


def random_categorical(seed: SeedContext, N: int) -> Categorical:
    """Uniform draw from the probability simplex (normalised Exp(1) vector)."""
    return make_categorical(exp_array(seed, np.arange(N)))


def race_tensor(seed: SeedContext, trials, K: int, N: int) -> np.ndarray:
    """Races for many trials: ``[t, k, i] = exp_variate(seed.child(trials[t], k, i))``."""
    trials = np.asarray(trials)
    return exp_array(seed, trials[:, None, None], np.arange(K)[None, :, None], np.arange(N))


def race_scores(s: np.ndarray, p: np.ndarray) -> np.ndarray:
    """``s / p`` with ``+inf`` where ``p == 0``; ``p`` broadcasts over ``s``."""
    p = np.broadcast_to(p, s.shape)
    out = np.full(s.shape, np.inf)
    with np.errstate(over="ignore"):  # denormal masses may overflow to +inf
        np.divide(s, p, out=out, where=p > 0)
    return out


def gls_batch(p, q, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """GLS over a batch of race tensors ``s`` of shape ``(..., K, N)``.

    ``p`` is a single proposal ``(N,)`` or one proposal per row ``(K, N)``.
    Returns ``y`` with shape ``s.shape[:-2]`` and ``x`` with shape ``s.shape[:-1]``.
    """
    p, q = as_probs(p), as_probs(q)
    if p.shape[-1] != s.shape[-1] or q.shape[-1] != s.shape[-1]:
        raise AlphabetMismatch("distributions and races disagree on N")
    x = race_scores(s, p).argmin(axis=-1)
    y = race_scores(s.min(axis=-2), q).argmin(axis=-1)
    return y, x


def gls_nested(p, q, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """GLS for every prefix ``K' = 1..K`` of the rows of ``s`` at once.

    Returns ``y`` of shape ``(trials, K)`` where column ``K'-1`` is the target
    sample using rows ``:K'``, and ``x`` of shape ``(trials, K)``; the proposal
    rows do not depend on ``K'``.
    """
    p, q = as_probs(p), as_probs(q)
    x = race_scores(s, p).argmin(axis=-1)
    prefix_min = np.minimum.accumulate(s, axis=-2)
    y = race_scores(prefix_min, q).argmin(axis=-1)
    return y, x


def nested_accept(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``acc[t, K'-1] = y[t, K'-1] in x[t, :K']`` for the output of :func:`gls_nested`."""
    hits = x[:, None, :] == y[:, :, None]
    upper = np.tril(np.ones((x.shape[1], x.shape[1]), dtype=bool))
    return (hits & upper).any(axis=-1)


def gls_sample(p, q, races: RaceMatrix) -> CoupleOutcome:
    """Gumbel-max list sampling of one target draw against ``K`` proposals."""
    _same_alphabet(p, q, races.s)
    y, x = gls_batch(p, q, races.s)
    return CoupleOutcome(int(y), tuple(int(v) for v in x))


def gls_sample_heterogeneous(p_list: Sequence, q, races: RaceMatrix) -> CoupleOutcome:
    """GLS where proposal ``k`` has its own distribution ``p_list[k]``."""
    _same_alphabet(*p_list, q, races.s)
    P = np.stack([as_probs(p) for p in p_list])
    if P.shape[0] != races.K:
        raise AlphabetMismatch("need one proposal per race row")
    return gls_sample(P, q, races)


# Baselines

_IND_TARGET, _IND_PROPOSAL = 0, 1


def independent_batch(p, q, K: int, seed: SeedContext, trials) -> tuple[np.ndarray, np.ndarray]:
    """Target and proposals from unrelated races (no shared randomness)."""
    p, q = as_probs(p), as_probs(q)
    N = _same_alphabet(p, q)
    trials = np.asarray(trials)
    sy = exp_array(seed, trials[:, None], _IND_TARGET, np.arange(N))
    sx = exp_array(seed, trials[:, None, None], _IND_PROPOSAL, np.arange(K)[:, None], np.arange(N))
    return race_scores(sy, q).argmin(-1), race_scores(sx, p).argmin(-1)


def independent_sample(p, q, K: int, seed: SeedContext) -> CoupleOutcome:
    y, x = independent_batch(p, q, K, seed, np.array([0]))
    return CoupleOutcome(int(y[0]), tuple(int(v) for v in x[0]))


_RR_DRAFT, _RR_ACCEPT, _RR_RESIDUAL = 0, 1, 2


def recursive_rejection_batch(p_list, q, seed: SeedContext, trials):
    """Recursive rejection sampling (multi-draft modified rejection).

    Draft ``k`` is accepted with probability ``min(1, r(x)/p_k(x))`` against
    the running residual ``r``; on rejection ``r <- norm(max(r - p_k, 0))``.
    If every draft is rejected the output comes from the final residual.

    Returns ``(y, x, first)`` where ``first[t]`` is the index of the first
    accepted draft, or ``K`` if all were rejected.  Because draft ``k`` only
    sees the residual left by drafts ``0..k-1``, running with fewer drafts
    gives the same outcome truncated: ``accept with K' drafts == first < K'``.
    """
    P = np.atleast_2d(np.stack([as_probs(p) for p in p_list]))
    q = as_probs(q)
    K, N = P.shape
    _same_alphabet(P, q)
    trials = np.asarray(trials)
    M = trials.size
    sx = exp_array(seed, trials[:, None, None], _RR_DRAFT, np.arange(K)[:, None], np.arange(N))
    x = race_scores(sx, P).argmin(-1)
    ua = uniform_array(seed, trials[:, None], _RR_ACCEPT, np.arange(K))
    sres = exp_array(seed, trials[:, None], _RR_RESIDUAL, np.arange(N))

    r = np.broadcast_to(q, (M, N)).copy()
    first = np.full(M, K)
    live = np.ones(M, dtype=bool)
    rows = np.arange(M)
    for k in range(K):
        px = P[k, x[:, k]]
        rx = r[rows, x[:, k]]
        ok = live & (ua[:, k] * px <= rx)
        first[ok] = k
        live &= ~ok
        if not live.any():
            break
        nr = np.maximum(r[live] - P[k], 0.0)
        tot = nr.sum(axis=1, keepdims=True)
        # tot == 0 only when r <= p_k pointwise, and then acceptance was certain.
        r[live] = np.divide(nr, tot, out=r[live], where=tot > 0)
    y = race_scores(sres, r).argmin(-1)
    acc = first < K
    y[acc] = x[acc, first[acc]]
    return y, x, first


def recursive_rejection_sample(p_list: Sequence, q, seed: SeedContext) -> CoupleOutcome:
    y, x, _ = recursive_rejection_batch(p_list, q, seed, np.array([0]))
    return CoupleOutcome(int(y[0]), tuple(int(v) for v in x[0]))


def empirical_law(samples: np.ndarray, N: int) -> np.ndarray:
    return np.bincount(np.asarray(samples).ravel(), minlength=N) / np.asarray(samples).size
