"""One encoder, K decoders with side information.

The encoder sees the source ``a`` and picks index ``Y`` by a GLS race over
all K rows against ``p_{W|A}(.|a)``; it sends only the label ``M = l_Y``.
Decoder ``k`` sees side information ``t_k`` and races its own row against
``p_{W|T}(.|t_k)`` restricted to the indices carrying label ``M``.

Labels are 0-based (``0..L_max-1``), as are all symbols.  Randomness per
trial context ``ctx``:

=========================  ========================================
``ctx.child(0, k, i)``     discrete races (index ``i``, row ``k``)
``ctx.child(1, i)``        discrete labels, ``floor(u * L_max)``
``ctx.child(2)``           discrete source draw
``ctx.child(3, k)``        discrete side-information draw for ``k``
=========================  ========================================

and for the Gaussian scheme:

=========================  ========================================
``ctx.child(0)``           source ``a`` (standard normal)
``ctx.child(1, k)``        side-information noise for decoder ``k``
``ctx.child(2, i)``        prior sample ``U_i / sigma_W``
``ctx.child(3, i)``        label uniform for ``U_i``
``ctx.child(4, k, i)``     race for ``U_i`` on row ``k``
=========================  ========================================

Prior samples are drawn once as standard normals and scaled by ``sigma_W``,
so every ``sigma^2_{W|A}`` candidate sees the same underlying randomness.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .coupling import RaceMatrix, as_probs, race_scores
from .errors import (AlphabetMismatch, AllZeroWeights, EmptySupport, InconsistentModel,
                     InvalidConfig, NoCandidate)
from .rng import (SeedContext, context_key, exp_array, fold, normal_array, normal_from_key,
                  to_unit, uniform_array)

_TOL = 1e-9


class Scheme(str, enum.Enum):
    GLS = "gls"
    BASELINE = "baseline"


def _rows_ok(m: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if np.any(m < 0) or np.any(np.abs(m.sum(axis=-1) - 1.0) > _TOL):
        raise InconsistentModel(f"{name} rows must be probability vectors")
    return m


class DiscreteWZModel:
    """Finite joint law ``p(a) p(t|a) p(w|a)``; ``W`` and ``T`` are independent given ``A``.

    Tables are indexed ``[a]``, ``[a, t]``, ``[a, w]``.  A supplied
    ``p_w_given_t`` is checked against the derived one.
    """

    def __init__(self, p_a, p_t_given_a, p_w_given_a, p_w_given_t=None):
        self.p_a = _rows_ok(p_a, "p_A")
        self.p_t_given_a = _rows_ok(p_t_given_a, "p_T|A")
        self.p_w_given_a = _rows_ok(p_w_given_a, "p_W|A")
        na = self.p_a.size
        if self.p_t_given_a.shape[0] != na or self.p_w_given_a.shape[0] != na:
            raise InconsistentModel("conditional tables need one row per source symbol")
        p_t = self.p_a @ self.p_t_given_a
        if np.any(p_t <= 0):
            raise InconsistentModel("every side-information symbol needs positive mass")
        self.p_a_given_t = (self.p_a[:, None] * self.p_t_given_a / p_t[None, :]).T  # [t, a]
        self.p_w_given_t = derive_p_w_given_t(self)
        if p_w_given_t is not None:
            given = np.asarray(p_w_given_t, dtype=np.float64)
            if given.shape != self.p_w_given_t.shape or np.abs(given - self.p_w_given_t).max() > _TOL:
                raise InconsistentModel("p_W|T disagrees with sum_a p_W|A p_A|T")

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.p_a.size, self.p_t_given_a.shape[1], self.p_w_given_a.shape[1]


def derive_p_w_given_t(model: DiscreteWZModel) -> np.ndarray:
    """``[t, w] = sum_a p(w|a) p(a|t)``."""
    out = model.p_a_given_t @ model.p_w_given_a
    if np.any(np.abs(out.sum(axis=1) - 1.0) > _TOL):
        raise InconsistentModel("derived p_W|T rows are not normalised")
    return out


@dataclass(frozen=True)
class CodingOutcome:
    y: int
    m: int
    x: tuple[int, ...]  # -1 marks a decoder with no candidate
    reconstructions: tuple[float, ...] = ()
    best_distortion: float = float("nan")

    @property
    def matched(self) -> bool:
        return self.y in self.x


def encode_index_discrete(model: DiscreteWZModel, a: int, races: RaceMatrix, labels,
                          scheme: Scheme | str = Scheme.GLS) -> tuple[int, int]:
    """``(Y, M)``: GLS over every race row, or row 0 only for the baseline."""
    q = model.p_w_given_a[a]
    if races.N != q.size:
        raise AlphabetMismatch("races and W alphabet differ")
    if not np.any(q > 0):
        raise EmptySupport("p_W|A row is empty")
    s = races.s if Scheme(scheme) is Scheme.GLS else races.s[:1]
    y = int(race_scores(s.min(axis=0), q).argmin())
    return y, int(np.asarray(labels)[y])


def decode_index_discrete(model: DiscreteWZModel, t_k: int, m: int, k: int, races: RaceMatrix,
                          labels, scheme: Scheme | str = Scheme.GLS) -> int:
    """Index chosen by decoder ``k``; the baseline reads row 0 instead of row ``k``."""
    row = k if Scheme(scheme) is Scheme.GLS else 0
    p = model.p_w_given_t[t_k] * (np.asarray(labels) == m)
    if not np.any(p > 0):
        raise NoCandidate(f"no index with label {m} has positive mass")
    return int(race_scores(races.s[row], p).argmin())


def baseline_decode(model: DiscreteWZModel, t_k: int, m: int, k: int, races: RaceMatrix, labels) -> int:
    """Shared-randomness baseline: every decoder reuses race row 0."""
    return decode_index_discrete(model, t_k, m, k, races, labels, Scheme.BASELINE)


def draw_labels(seed: SeedContext, n: int, L_max: int) -> np.ndarray:
    return np.minimum((uniform_array(seed, 1, np.arange(n)) * L_max).astype(np.int64), L_max - 1)


def _inverse_cdf(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)


@dataclass
class DiscreteBatch:
    a: np.ndarray
    t: np.ndarray  # (M, K)
    y: np.ndarray
    m: np.ndarray
    x: np.ndarray  # (M, K), -1 for no candidate

    @property
    def matched(self) -> np.ndarray:
        return (self.x == self.y[:, None]).any(axis=1)


def simulate_discrete(model: DiscreteWZModel, K: int, L_max: int, seed: SeedContext, trials,
                      scheme: Scheme | str = Scheme.GLS) -> DiscreteBatch:
    """Vectorised coding trials; trial ``t`` reads ``seed.child(t, ...)``."""
    scheme = Scheme(scheme)
    trials = np.asarray(trials)
    M = trials.size
    na, nt, nw = model.sizes
    a = _inverse_cdf(np.cumsum(model.p_a), uniform_array(seed, trials, 2))
    ut = uniform_array(seed, trials[:, None], 3, np.arange(K))
    t = np.empty((M, K), dtype=np.int64)
    for av in range(na):
        sel = a == av
        t[sel] = _inverse_cdf(np.cumsum(model.p_t_given_a[av]), ut[sel])
    s = exp_array(seed, trials[:, None, None], 0, np.arange(K)[:, None], np.arange(nw))
    lab = np.minimum((uniform_array(seed, trials[:, None], 1, np.arange(nw)) * L_max).astype(np.int64),
                     L_max - 1)
    s_enc = s.min(axis=1) if scheme is Scheme.GLS else s[:, 0]
    y = race_scores(s_enc, model.p_w_given_a[a]).argmin(-1)
    m = lab[np.arange(M), y]
    x = np.empty((M, K), dtype=np.int64)
    keep = lab == m[:, None]
    for k in range(K):
        row = s[:, k] if scheme is Scheme.GLS else s[:, 0]
        p = model.p_w_given_t[t[:, k]] * keep
        sc = race_scores(row, p)
        xk = sc.argmin(-1)
        xk[~np.isfinite(sc.min(-1))] = -1
        x[:, k] = xk
    return DiscreteBatch(a, t, y, m, x)


def code_discrete(model: DiscreteWZModel, K: int, L_max: int, seed: SeedContext,
                  scheme: Scheme | str = Scheme.GLS) -> CodingOutcome:
    """One trial through the per-symbol functions, drawing ``a`` and ``t`` from ``seed``."""
    b = simulate_discrete(model, K, L_max, seed, np.array([0]), scheme)
    trial = seed.child(0)
    races = RaceMatrix(exp_array(trial, 0, np.arange(K)[:, None], np.arange(model.sizes[2])))
    labels = draw_labels(trial, model.sizes[2], L_max)
    y, m = encode_index_discrete(model, int(b.a[0]), races, labels, scheme)
    xs = []
    for k in range(K):
        try:
            xs.append(decode_index_discrete(model, int(b.t[0, k]), m, k, races, labels, scheme))
        except NoCandidate:
            xs.append(-1)
    return CodingOutcome(y, m, tuple(xs))


def example_models() -> dict[str, DiscreteWZModel]:
    """Small hand-built models used by the tests and the ``wz-discrete`` command."""
    sym_t = np.full((4, 4), 0.1) + np.eye(4) * 0.6
    sym_w = np.full((4, 8), 0.1 / 6)
    for a in range(4):
        sym_w[a, 2 * a : 2 * a + 2] = 0.45
    return {
        "independent": DiscreteWZModel(
            [0.5, 0.3, 0.2],
            [[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.2, 0.2, 0.6]],
            np.full((3, 4), 0.25),
        ),
        "symmetric": DiscreteWZModel(np.full(4, 0.25), sym_t, sym_w),
        "skewed": DiscreteWZModel(
            [0.6, 0.3, 0.1],
            [[0.9, 0.1], [0.5, 0.5], [0.2, 0.8]],
            [[0.6, 0.2, 0.1, 0.1, 0.0], [0.1, 0.5, 0.3, 0.05, 0.05], [0.0, 0.1, 0.1, 0.3, 0.5]],
        ),
    }


# Gaussian source


@dataclass(frozen=True)
class GaussianWZConfig:
    var_w_given_a: float
    var_t_given_a: float = 0.5
    N: int = 2**15
    L_max: int = 2
    K: int = 1
    trials: int = 10_000

    def __post_init__(self):
        if not (self.var_w_given_a > 0 and self.var_t_given_a > 0):
            raise InvalidConfig("variances must be positive")
        if self.N < 1 or self.L_max < 1 or self.K < 1:
            raise InvalidConfig("N, L_max and K must be positive")

    @property
    def sigma_t2(self) -> float:
        return 1.0 + self.var_t_given_a

    @property
    def sigma_w2(self) -> float:
        return 1.0 + self.var_w_given_a


def _log_normal_pdf(x, mean, var):
    return -0.5 * (x - mean) ** 2 / var - 0.5 * math.log(2.0 * math.pi * var)


def gaussian_p_w_given_t(cfg: GaussianWZConfig, t: float) -> tuple[float, float]:
    return t / cfg.sigma_t2, cfg.sigma_w2 - 1.0 / cfg.sigma_t2


def mmse_reconstruct(cfg: GaussianWZConfig, w, t):
    """``E[A | W=w, T=t]``."""
    e, z = cfg.var_w_given_a, cfg.var_t_given_a
    return (z * w + e * t) / (e + z + e * z)


@dataclass(frozen=True)
class ImportanceList:
    u: np.ndarray  # samples from p_W = N(0, sigma_W^2)
    labels: np.ndarray
    L_max: int


def make_importance_list(cfg: GaussianWZConfig, seed: SeedContext) -> ImportanceList:
    i = np.arange(cfg.N)
    u = math.sqrt(cfg.sigma_w2) * normal_array(seed, 2, i)
    labels = np.minimum((uniform_array(seed, 3, i) * cfg.L_max).astype(np.int64), cfg.L_max - 1)
    return ImportanceList(u, labels, cfg.L_max)


@dataclass(frozen=True)
class ImportanceWeights:
    log_unnormalized: np.ndarray
    normalized: np.ndarray

    @property
    def unnormalized(self) -> np.ndarray:
        return np.exp(self.log_unnormalized)


def importance_weights(cfg: GaussianWZConfig, lst: ImportanceList, *, a: float | None = None,
                       t: float | None = None, m: int | None = None) -> ImportanceWeights:
    """Encoder weights (pass ``a``) or decoder weights (pass ``t`` and ``m``)."""
    log_pw = _log_normal_pdf(lst.u, 0.0, cfg.sigma_w2)
    if a is not None:
        lw = _log_normal_pdf(lst.u, a, cfg.var_w_given_a) - log_pw
    elif t is not None and m is not None:
        mean, var = gaussian_p_w_given_t(cfg, t)
        lw = _log_normal_pdf(lst.u, mean, var) - log_pw + math.log(lst.L_max)
        lw = np.where(lst.labels == m, lw, -np.inf)
    else:
        raise InvalidConfig("give a for the encoder or t and m for a decoder")
    top = lw.max()
    if not np.isfinite(top):
        raise AllZeroWeights("no sample carries a positive weight")
    w = np.exp(lw - top)
    return ImportanceWeights(lw, w / w.sum())


def encode_decode_continuous(cfg: GaussianWZConfig, a: float, t, seed: SeedContext,
                             scheme: Scheme | str = Scheme.GLS) -> CodingOutcome:
    """Full pipeline for one trial; reference for the compiled sweep."""
    scheme = Scheme(scheme)
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    K = t.size
    lst = make_importance_list(cfg, seed)
    logs = np.log(exp_array(seed, 4, np.arange(K)[:, None], np.arange(cfg.N)))
    enc_rows = logs if scheme is Scheme.GLS else logs[:1]
    lq = importance_weights(cfg, lst, a=a).log_unnormalized
    y = int((enc_rows.min(axis=0) - lq).argmin())
    m = int(lst.labels[y])
    xs, recon = [], []
    for k in range(K):
        row = logs[k] if scheme is Scheme.GLS else logs[0]
        try:
            lp = importance_weights(cfg, lst, t=t[k], m=m).log_unnormalized
            xk = int((row - lp).argmin())
            w = lst.u[xk]
        except AllZeroWeights:
            xk, w = -1, 0.0
        xs.append(xk)
        recon.append(float(mmse_reconstruct(cfg, w, t[k])))
    best = min((r - a) ** 2 for r in recon)
    return CodingOutcome(y, m, tuple(xs), tuple(recon), float(best))


def baseline_decode_continuous(cfg: GaussianWZConfig, a: float, t, seed: SeedContext) -> CodingOutcome:
    return encode_decode_continuous(cfg, a, t, seed, Scheme.BASELINE)


def source_and_side(seed: SeedContext, K: int, var_t_given_a: float) -> tuple[float, np.ndarray]:
    """Source sample and the K side observations for one trial context."""
    a = float(normal_array(seed, 0))
    t = a + math.sqrt(var_t_given_a) * normal_array(seed, 1, np.arange(K))
    return a, t


@njit(cache=True)
def _rd_kernel(key, trials, N, K, var_t, sig2, Ls, err_g, err_b, hit_g, hit_b):
    nS, nL = sig2.size, Ls.size
    z = np.empty(N)
    v = np.empty(N)
    logs = np.empty((K, N))
    lab = np.empty((nL, N), dtype=np.int64)
    tk = np.empty(K)
    u = np.empty(N)
    lpw = np.empty(N)
    lp = np.empty(N)
    row_best = np.empty(K)
    row_arg = np.empty(K, dtype=np.int64)
    y_of = np.empty(K, dtype=np.int64)
    total = 0
    for L in Ls:
        total += L
    off = np.zeros(nL, dtype=np.int64)
    for l in range(1, nL):
        off[l] = off[l - 1] + Ls[l - 1]
    bv = np.empty((K, 2, total))
    bi = np.empty((K, 2, total), dtype=np.int64)
    sig_t2 = 1.0 + var_t
    for n in range(trials.size):
        h = fold(key, trials[n])
        a = normal_from_key(fold(h, 0))
        h1 = fold(h, 1)
        for k in range(K):
            tk[k] = a + math.sqrt(var_t) * normal_from_key(fold(h1, k))
        h2, h3, h4 = fold(h, 2), fold(h, 3), fold(h, 4)
        for i in range(N):
            z[i] = normal_from_key(fold(h2, i))
            v[i] = to_unit(fold(h3, i))
            for l in range(nL):
                lab[l, i] = min(int(v[i] * Ls[l]), Ls[l] - 1)
        for k in range(K):
            hk = fold(h4, k)
            for i in range(N):
                logs[k, i] = math.log(-math.log(to_unit(fold(hk, i))))
        for s in range(nS):
            e = sig2[s]
            sw2 = 1.0 + e
            sw = math.sqrt(sw2)
            var_wt = sw2 - 1.0 / sig_t2
            den = e + var_t + e * var_t
            for i in range(N):
                u[i] = sw * z[i]
                lpw[i] = -0.5 * u[i] * u[i] / sw2
            # encoder: best index per row, then prefix minima over rows
            for k in range(K):
                best, arg = np.inf, -1
                for i in range(N):
                    d = u[i] - a
                    sc = logs[k, i] + 0.5 * d * d / e + lpw[i]
                    if sc < best:
                        best, arg = sc, i
                row_best[k], row_arg[k] = best, arg
            cur, cur_arg = np.inf, -1
            for k in range(K):
                if row_best[k] < cur:
                    cur, cur_arg = row_best[k], row_arg[k]
                y_of[k] = cur_arg
            # decoders: per-label minima for every L at once
            for k in range(K):
                mean = tk[k] / sig_t2
                for i in range(N):
                    d = u[i] - mean
                    lp[i] = -0.5 * d * d / var_wt - lpw[i]
                for r in range(2):
                    row = k if r == 0 else 0
                    if r == 1 and k == 0:
                        for j in range(total):
                            bv[k, 1, j] = bv[k, 0, j]
                            bi[k, 1, j] = bi[k, 0, j]
                        continue
                    for j in range(total):
                        bv[k, r, j] = np.inf
                        bi[k, r, j] = -1
                    for i in range(N):
                        sc = logs[row, i] - lp[i]
                        for l in range(nL):
                            j = off[l] + lab[l, i]
                            if sc < bv[k, r, j]:
                                bv[k, r, j] = sc
                                bi[k, r, j] = i
            for l in range(nL):
                for kk in range(K):  # kk + 1 decoders active
                    for r in range(2):
                        y = y_of[kk] if r == 0 else y_of[0]
                        m = lab[l, y]
                        best = np.inf
                        hit = False
                        for k in range(kk + 1):
                            x = bi[k, r, off[l] + m]
                            w = u[x] if x >= 0 else 0.0
                            ah = (var_t * w + e * tk[k]) / den
                            d2 = (ah - a) * (ah - a)
                            if d2 < best:
                                best = d2
                            if x == y:
                                hit = True
                        if r == 0:
                            err_g[s, kk, l, n] = best
                            hit_g[s, kk, l, n] = hit
                        else:
                            err_b[s, kk, l, n] = best
                            hit_b[s, kk, l, n] = hit


@dataclass
class SweepArrays:
    """Per-trial squared errors and match flags, indexed ``[sigma, K-1, L, trial]``."""

    sigma2: np.ndarray
    Ls: np.ndarray
    err: dict = field(default_factory=dict)  # scheme -> array
    hit: dict = field(default_factory=dict)


def sweep_trials(seed: SeedContext, trials, sigma2, Ls, K: int, N: int = 2**15,
                 var_t_given_a: float = 0.5, chunk: int = 1000) -> SweepArrays:
    """Run the compiled kernel; trial ``t`` uses ``seed.child(t)``."""
    trials = np.asarray(trials, dtype=np.int64)
    sigma2 = np.asarray(sigma2, dtype=np.float64)
    Ls = np.asarray(Ls, dtype=np.int64)
    shape = (sigma2.size, K, Ls.size, trials.size)
    eg, eb = np.empty(shape), np.empty(shape)
    hg, hb = np.empty(shape, dtype=np.bool_), np.empty(shape, dtype=np.bool_)
    key = context_key(seed)
    for lo in range(0, trials.size, chunk):
        sl = slice(lo, lo + chunk)
        _rd_kernel(key, trials[sl], N, K, var_t_given_a, sigma2, Ls,
                   eg[..., sl], eb[..., sl], hg[..., sl], hb[..., sl])
    return SweepArrays(sigma2, Ls, {Scheme.GLS: eg, Scheme.BASELINE: eb},
                       {Scheme.GLS: hg, Scheme.BASELINE: hb})


@dataclass(frozen=True)
class RDGrid:
    Ks: tuple[int, ...] = (1, 2, 3, 4)
    Ls: tuple[int, ...] = (2, 4, 8, 16, 32, 64)
    sigma2: tuple[float, ...] = (0.01, 0.008, 0.006, 0.005, 0.003, 0.002, 0.001)
    N: int = 2**15
    selection_trials: int = 10_000
    eval_trials: int = 10_000
    var_t_given_a: float = 0.5

    def __post_init__(self):
        if not self.Ks or min(self.Ks) < 1 or not self.Ls or min(self.Ls) < 1:
            raise InvalidConfig("K and L_max values must be positive")
        if not self.sigma2 or min(self.sigma2) <= 0:
            raise InvalidConfig("sigma^2 candidates must be positive")
        if self.selection_trials < 2 or self.eval_trials < 2:
            raise InvalidConfig("need at least two trials per run")


def to_db(mse):
    return 10.0 * np.log10(mse)


_DB_FLOOR = 1e-300  # keeps a (never observed) exact reconstruction finite in dB


def trial_db(err: np.ndarray) -> np.ndarray:
    """Per-trial distortion in dB, ``10 log10`` of the squared error."""
    return to_db(np.maximum(err, _DB_FLOOR))


class Metric(str, enum.Enum):
    MEAN_DB = "mean_db"  # average of per-trial dB values
    MSE_DB = "mse_db"  # dB of the average squared error


def summarize_errors(err: np.ndarray, metric: Metric | str) -> tuple[float, float]:
    """``(value_db, stderr_db)`` over the last axis of ``err``."""
    n = err.shape[-1]
    if Metric(metric) is Metric.MEAN_DB:
        d = trial_db(err)
        return float(d.mean(-1)), float(d.std(-1, ddof=1) / math.sqrt(n))
    mse = err.mean(-1)
    se = err.std(-1, ddof=1) / math.sqrt(n)
    return float(to_db(mse)), float(10.0 / math.log(10.0) * se / mse)


@dataclass
class RDResult:
    grid: RDGrid
    selection: SweepArrays
    evaluation: SweepArrays
    chosen: dict  # (scheme, K, L) -> sigma index
    metric: Metric = Metric.MEAN_DB

    def errors(self, scheme, K: int, L: int) -> np.ndarray:
        """Evaluation-run squared errors at the selected ``sigma^2``."""
        scheme = Scheme(scheme)
        s = self.chosen[scheme, K, L]
        return self.evaluation.err[scheme][s, K - 1, list(self.grid.Ls).index(L)]

    def db(self, scheme, K: int, L: int, metric: Metric | str | None = None) -> float:
        return summarize_errors(self.errors(scheme, K, L), metric or self.metric)[0]

    def stderr_db(self, scheme, K: int, L: int, metric: Metric | str | None = None) -> float:
        return summarize_errors(self.errors(scheme, K, L), metric or self.metric)[1]

    def records(self):
        """One row per ``(run, scheme, K, L_max, sigma^2)``."""
        out = []
        for run, arr in (("selection", self.selection), ("evaluation", self.evaluation)):
            for scheme in Scheme:
                for K in self.grid.Ks:
                    for li, L in enumerate(self.grid.Ls):
                        for si, s2 in enumerate(self.grid.sigma2):
                            e = arr.err[scheme][si, K - 1, li]
                            d, dse = summarize_errors(e, Metric.MEAN_DB)
                            m, mse_se = summarize_errors(e, Metric.MSE_DB)
                            out.append(dict(run=run, scheme=scheme.value, K=K, L_max=L,
                                            rate_bits=math.log2(L), var_w_given_a=s2,
                                            distortion_db=d, stderr_db=dse,
                                            mse_db=m, mse_stderr_db=mse_se,
                                            match_rate=float(arr.hit[scheme][si, K - 1, li].mean()),
                                            trials=int(e.size),
                                            selected=self.chosen[scheme, K, L] == si))
        return out


def run_rd_sweep(grid: RDGrid, seed: SeedContext, chunk: int = 1000,
                 metric: Metric | str = Metric.MEAN_DB) -> RDResult:
    """Select ``sigma^2`` per ``(scheme, K, L)`` on one run and re-measure on a fresh one.

    Selection uses ``seed.child(0)``, evaluation ``seed.child(1)``; the
    distortion minimised and reported is ``metric``.
    """
    Kmax = max(grid.Ks)
    kw = dict(sigma2=grid.sigma2, Ls=grid.Ls, K=Kmax, N=grid.N,
              var_t_given_a=grid.var_t_given_a, chunk=chunk)
    sel = sweep_trials(seed.child(0), np.arange(grid.selection_trials), **kw)
    ev = sweep_trials(seed.child(1), np.arange(grid.eval_trials), **kw)
    chosen = {}
    for scheme in Scheme:
        e = sel.err[scheme]
        means = trial_db(e).mean(-1) if Metric(metric) is Metric.MEAN_DB else e.mean(-1)
        for K in grid.Ks:
            for li, L in enumerate(grid.Ls):
                chosen[scheme, K, L] = int(means[:, K - 1, li].argmin())
    return RDResult(grid, sel, ev, chosen, Metric(metric))
