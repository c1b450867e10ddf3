"""Drafter-invariant multi-draft speculative decoding over tabular models.

Language models here are exact conditional tables (:class:`TabularLM`), so
sequence-level laws can be enumerated and compared against simulation.

Randomness layout: episode ``seed`` addresses race ``(step, k, i)`` for
``step = 0..L`` (step ``L`` is the bonus token), draft row ``k`` and symbol
``i``.  Drafting and verification read the same races.

Two implementations of the decoding round exist: the per-episode functions
(:func:`draft_generate`, :func:`verify_and_emit`, :func:`run_decode_episode`)
follow the algorithm literally and are the reference; :func:`simulate_episodes`
vectorises the same round over many episodes for the Monte Carlo harnesses.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .coupling import as_probs, race_scores
from .errors import EmptyInput, MissingContextRow, ShapeMismatch, TooLarge
from .rng import SeedContext, exp_array, uniform_array


class Mode(str, enum.Enum):
    CONDITIONAL = "conditional"
    STRONG = "strong"


class TabularLM:
    """Autoregressive model given by an explicit table of next-token rows.

    Contexts longer than ``C`` are truncated to their last ``C`` tokens.  The
    table is stored densely, one row per context of length ``0..C``; rows
    that were never supplied are NaN and raise :class:`MissingContextRow`
    when reached.
    """

    def __init__(self, N: int, C: int, table: np.ndarray):
        self.N = int(N)
        self.C = int(C)
        self.offsets = np.cumsum([0] + [self.N**m for m in range(self.C + 1)])
        table = np.asarray(table, dtype=np.float64)
        if table.shape != (self.offsets[-1], self.N):
            raise ShapeMismatch(f"table must have shape {(self.offsets[-1], self.N)}")
        full = ~np.isnan(table).any(axis=1)
        if np.any(table[full] < 0) or np.any(np.abs(table[full].sum(1) - 1) > 1e-9):
            raise ValueError("every table row must be a probability vector")
        self.table = table
        self._pow = self.N ** (self.C - 1 - np.arange(self.C))

    @classmethod
    def from_rows(cls, N: int, C: int, rows: Mapping[tuple, Sequence[float]]):
        lm = cls(N, C, np.full((sum(N**m for m in range(C + 1)), N), np.nan))
        for ctx, row in rows.items():
            w = np.asarray(row, dtype=np.float64)
            lm.table[lm.index(ctx)] = w / w.sum()
        return lm

    @classmethod
    def random(cls, N: int, C: int, rng: np.random.Generator, concentration: float = 1.0):
        n = sum(N**m for m in range(C + 1))
        return cls(N, C, rng.dirichlet(np.full(N, concentration), size=n))

    @classmethod
    def point_mass_chain(cls, N: int, C: int, next_token):
        """Deterministic model: ``next_token(context_tuple)`` has all the mass."""
        table = np.zeros((sum(N**m for m in range(C + 1)), N))
        row = 0
        for length in range(C + 1):
            for ctx in itertools.product(range(N), repeat=length):
                table[row, next_token(ctx)] = 1.0
                row += 1
        return cls(N, C, table)

    def tempered(self, temperature: float) -> "TabularLM":
        """Rows raised to ``1/temperature`` and renormalised."""
        with np.errstate(divide="ignore"):
            logits = np.log(self.table) / temperature
        w = np.exp(logits - np.nanmax(logits, axis=1, keepdims=True))
        return TabularLM(self.N, self.C, w / w.sum(1, keepdims=True))

    def _window(self, context) -> tuple:
        ctx = tuple(int(t) for t in context)
        return ctx[max(0, len(ctx) - self.C) :] if self.C else ()

    def index(self, context) -> int:
        ctx = self._window(context)
        val = 0
        for t in ctx:
            val = val * self.N + t
        return int(self.offsets[len(ctx)]) + val

    def row(self, context) -> np.ndarray:
        r = self.table[self.index(context)]
        if np.isnan(r[0]):
            raise MissingContextRow(f"no row for context {self._window(context)}")
        return r

    def rows_batch(self, hist: np.ndarray, hlen: np.ndarray) -> np.ndarray:
        """Rows for right-aligned context windows ``hist`` of lengths ``hlen``."""
        if self.C == 0:
            idx = np.zeros(hist.shape[0], dtype=np.int64)
        else:
            pos = np.arange(self.C)
            w = np.where(pos[None, :] >= self.C - hlen[:, None], self._pow[None, :], 0)
            idx = self.offsets[hlen] + (hist * w).sum(axis=1)
        rows = self.table[idx]
        if np.isnan(rows[:, 0]).any():
            raise MissingContextRow("a reached context has no table row")
        return rows


class Window:
    """Right-aligned last-``C`` token windows for a batch of contexts."""

    def __init__(self, hist: np.ndarray, hlen: np.ndarray):
        self.hist = hist
        self.hlen = hlen

    @classmethod
    def of(cls, c: Sequence[int], M: int, C: int) -> "Window":
        c = [int(t) for t in c][max(0, len(c) - C) :] if C else []
        hist = np.zeros((M, C), dtype=np.int64)
        if c:
            hist[:, C - len(c) :] = c
        return cls(hist, np.full(M, len(c), dtype=np.int64))

    def copy(self) -> "Window":
        return Window(self.hist.copy(), self.hlen.copy())

    def take(self, sel) -> "Window":
        return Window(self.hist[sel], self.hlen[sel])

    def push(self, tokens: np.ndarray, where=None) -> None:
        C = self.hist.shape[1]
        if C == 0:
            return
        if where is None:
            where = np.ones(self.hist.shape[0], dtype=bool)
        self.hist[where, :-1] = self.hist[where, 1:]
        self.hist[where, -1] = tokens[where]
        self.hlen[where] = np.minimum(self.hlen[where] + 1, C)


@dataclass(frozen=True)
class DecodeConfig:
    K: int
    L: int
    mode: Mode = Mode.CONDITIONAL
    drafters: tuple = ()

    def __post_init__(self):
        if self.K < 1 or self.L < 1:
            raise ValueError("K and L must be >= 1")
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.drafters and len(self.drafters) not in (1, self.K):
            raise ValueError("give one drafter or one per draft")

    def drafter(self, k: int) -> TabularLM:
        if not self.drafters:
            raise ValueError("no drafter configured")
        return self.drafters[k if len(self.drafters) > 1 else 0]


@dataclass(frozen=True)
class DecodeTrace:
    context: tuple[int, ...]
    drafts: np.ndarray  # (K, L)
    tokens: tuple[int, ...]
    active_sets: tuple[frozenset, ...]  # S_0 .. S_{tau-1}, plus S_tau if nonempty
    accepts: tuple[bool, ...]  # one flag per verified draft position
    mode: Mode = Mode.CONDITIONAL

    @property
    def tau(self) -> int:
        return len(self.tokens)

    @property
    def accept_count(self) -> int:
        return sum(self.accepts)


def step_races(seed: SeedContext, K: int, N: int, L: int) -> np.ndarray:
    """Race tensor ``(L + 1, K, N)`` with entry ``(j, k, i)`` at ``seed.child(j, k, i)``."""
    return exp_array(seed, np.arange(L + 1)[:, None, None], np.arange(K)[:, None], np.arange(N))


def _drafter_list(lms, K):
    if isinstance(lms, TabularLM):
        return [lms] * K
    lms = list(lms)
    return lms * K if len(lms) == 1 else lms


def draft_generate(lms, c: Sequence[int], L: int, races: np.ndarray) -> np.ndarray:
    """``K`` drafts of length ``L``; draft ``k`` races against its own rows."""
    K = races.shape[1]
    lms = _drafter_list(lms, K)
    if races.shape[0] < L:
        raise ShapeMismatch("need at least L race steps")
    X = np.empty((K, L), dtype=np.int64)
    for k in range(K):
        prefix = list(c)
        for j in range(L):
            p = lms[k].row(prefix)
            X[k, j] = race_scores(races[j, k], p).argmin()
            prefix.append(int(X[k, j]))
    return X


def verify_and_emit(target: TabularLM, drafts: np.ndarray, c: Sequence[int], races: np.ndarray,
                    mode: Mode | str = Mode.CONDITIONAL) -> DecodeTrace:
    """Select output tokens by GLS against the active drafts.

    Only draft tokens, the target and the races are consulted; the models that
    produced the drafts play no part.
    """
    mode = Mode(mode)
    drafts = np.asarray(drafts)
    K, L = drafts.shape
    if races.shape[:2] != (L + 1, K):
        raise ShapeMismatch(f"races must be (L+1, K, N) = ({L + 1}, {K}, N)")
    c = tuple(int(t) for t in c)
    S = frozenset(range(K))
    Y: list[int] = []
    sets = [S]
    accepts = []
    for j in range(L + 1):
        if mode is Mode.CONDITIONAL:
            best = np.full(target.N, np.inf)
            for k in sorted(S):
                q = target.row(c + tuple(drafts[k, :j]))
                best = np.minimum(best, race_scores(races[j, k], q))
        else:
            q = target.row(c + tuple(Y))
            best = race_scores(races[j].min(axis=0), q)
        Y.append(int(best.argmin()))
        if j == L:
            break
        S = frozenset(k for k in S if drafts[k, j] == Y[-1])
        accepts.append(bool(S))
        if not S:
            break
        sets.append(S)
    return DecodeTrace(c, drafts, tuple(Y), tuple(sets), tuple(accepts), mode)


def verify_rejection(target: TabularLM, drafters, drafts: np.ndarray, c: Sequence[int],
                     seed: SeedContext) -> DecodeTrace:
    """Baseline verifier: recursive rejection over the active drafts.

    Needs the drafter probabilities, so its output can change when the
    drafters change even for identical draft tokens.
    """
    drafts = np.asarray(drafts)
    K, L = drafts.shape
    drafters = _drafter_list(drafters, K)
    c = tuple(int(t) for t in c)
    S = frozenset(range(K))
    Y: list[int] = []
    sets = [S]
    accepts = []
    for j in range(L + 1):
        r = target.row(c + tuple(Y)).copy()
        chosen = None
        if j < L:
            for k in sorted(S):
                tok = int(drafts[k, j])
                p = drafters[k].row(c + tuple(drafts[k, :j]))
                u = uniform_array(seed, j, k, 0, 1)
                if u * p[tok] <= r[tok]:
                    chosen = tok
                    break
                nr = np.maximum(r - p, 0.0)
                r = nr / nr.sum()
        if chosen is None:
            s = exp_array(seed, j, 0, np.arange(target.N), 2)
            chosen = int(race_scores(s, r).argmin())
        Y.append(chosen)
        if j == L:
            break
        S = frozenset(k for k in S if drafts[k, j] == chosen)
        accepts.append(bool(S))
        if not S:
            break
        sets.append(S)
    return DecodeTrace(c, drafts, tuple(Y), tuple(sets), tuple(accepts), Mode.CONDITIONAL)


def run_decode_episode(cfg: DecodeConfig, target: TabularLM, c: Sequence[int], seed: SeedContext,
                       verifier: str = "gls") -> DecodeTrace:
    """One draft-and-verify round under a single seed."""
    races = step_races(seed, cfg.K, target.N, cfg.L)
    drafts = draft_generate([cfg.drafter(k) for k in range(cfg.K)], c, cfg.L, races)
    if verifier == "gls":
        return verify_and_emit(target, drafts, c, races, cfg.mode)
    if verifier == "rejection":
        return verify_rejection(target, [cfg.drafter(k) for k in range(cfg.K)], drafts, c, seed)
    raise ValueError(f"unknown verifier {verifier!r}")


def block_efficiency(traces) -> float:
    """Mean number of emitted tokens per verification round."""
    taus = [t.tau if isinstance(t, DecodeTrace) else int(t) for t in traces] \
        if not isinstance(traces, np.ndarray) else traces
    if len(taus) == 0:
        raise EmptyInput("no traces")
    return float(np.mean(taus))


def strong_reference_sequence(target: TabularLM, c: Sequence[int], races: np.ndarray) -> tuple[int, ...]:
    """The draft-free sequence that strong-mode outputs are prefixes of."""
    Y: list[int] = []
    c = tuple(int(t) for t in c)
    for j in range(races.shape[0]):
        Y.append(int(race_scores(races[j].min(axis=0), target.row(c + tuple(Y))).argmin()))
    return tuple(Y)


def exact_sequence_law(lm: TabularLM, c: Sequence[int], length: int) -> dict[tuple, float]:
    """Exact probabilities of every continuation of ``c`` with ``length`` tokens."""
    if lm.N**length > 10**6:
        raise TooLarge(f"N**length = {lm.N ** length} exceeds 1e6")
    law = {(): 1.0}
    c = tuple(int(t) for t in c)
    for _ in range(length):
        nxt = {}
        for seq, pr in law.items():
            row = lm.row(c + seq)
            for i in range(lm.N):
                nxt[seq + (i,)] = pr * row[i]
        law = nxt
    return law


@dataclass(frozen=True)
class Verdict:
    applicable: bool
    holds: bool
    detail: str = ""


def invariance_check(target: TabularLM, seed: SeedContext, c: Sequence[int], drafts_a: np.ndarray,
                     drafts_b: np.ndarray, labels=("a", "b"), mode: Mode | str = Mode.CONDITIONAL,
                     drafters=None, verifier: str = "gls") -> Verdict:
    """Compare outputs for two draft matrices attributed to two drafters.

    ``drafters`` optionally maps each label to the model claimed to have
    produced that matrix; the GLS verifier ignores it, the rejection verifier
    needs it.
    """
    mode = Mode(mode)
    drafts_a, drafts_b = np.asarray(drafts_a), np.asarray(drafts_b)
    if drafts_a.shape != drafts_b.shape:
        raise ShapeMismatch("draft matrices differ in shape")
    K, L = drafts_a.shape
    if mode is Mode.CONDITIONAL and not np.array_equal(drafts_a, drafts_b):
        return Verdict(False, True, "draft tokens differ; no claim")
    races = step_races(seed, K, target.N, L)
    outs = []
    for label, d in zip(labels, (drafts_a, drafts_b)):
        if verifier == "gls":
            outs.append(verify_and_emit(target, d, c, races, mode).tokens)
        else:
            outs.append(verify_rejection(target, drafters[label], d, c, seed).tokens)
    if mode is Mode.CONDITIONAL:
        ok = outs[0] == outs[1]
        return Verdict(True, ok, "" if ok else f"{labels[0]}={outs[0]} {labels[1]}={outs[1]}")
    ref = strong_reference_sequence(target, c, races)
    ok = all(ref[: len(o)] == o for o in outs)
    return Verdict(True, ok, "" if ok else f"outputs {outs} not prefixes of {ref}")


# Vectorised episodes


@dataclass
class EpisodeBatch:
    """Outcome of many decoding rounds.

    ``tokens`` is ``(M, L + 1)`` padded with ``-1`` after ``tau``;
    ``active[:, j, k]`` is membership of draft ``k`` in ``S_j``.
    """

    drafts: np.ndarray
    tokens: np.ndarray
    tau: np.ndarray
    active: np.ndarray
    mode: Mode = Mode.CONDITIONAL
    extra: dict = field(default_factory=dict)


def batch_races(seed: SeedContext, episode_tags: Sequence[np.ndarray], K: int, N: int, L: int) -> np.ndarray:
    """``(M, L + 1, K, N)`` races; episode ``e`` reads ``seed.child(*tags[e], j, k, i)``."""
    tags = tuple(np.asarray(t)[:, None, None, None] for t in episode_tags)
    return exp_array(seed, *tags, np.arange(L + 1)[:, None, None], np.arange(K)[:, None], np.arange(N))


def simulate_episodes(target: TabularLM, drafters, K: int, L: int, mode: Mode | str,
                      seed: SeedContext, episode_tags: Sequence[np.ndarray],
                      window: Window, drafts: np.ndarray | None = None) -> EpisodeBatch:
    """Vectorised draft-and-verify rounds, identical to :func:`run_decode_episode`.

    Episode ``e`` uses ``seed.child(*[t[e] for t in episode_tags])`` and the
    context window ``window`` row ``e``.  Pass ``drafts`` ``(M, K, L)`` to
    verify externally supplied draft tokens instead of generating them.
    """
    mode = Mode(mode)
    M = window.hist.shape[0]
    N = target.N
    races = batch_races(seed, episode_tags, K, N, L)
    if drafts is None:
        lms = _drafter_list(drafters, K)
        drafts = np.empty((M, K, L), dtype=np.int64)
        for k in range(K):
            w = window.copy()
            for j in range(L):
                p = lms[k].rows_batch(w.hist, w.hlen)
                drafts[:, k, j] = race_scores(races[:, j, k], p).argmin(-1)
                w.push(drafts[:, k, j])
    tokens = np.full((M, L + 1), -1, dtype=np.int64)
    tau = np.zeros(M, dtype=np.int64)
    active = np.zeros((M, L + 1, K), dtype=bool)
    S = np.ones((M, K), dtype=bool)
    live = np.ones(M, dtype=bool)
    ywin = window.copy()
    # Conditional mode scores every row against the target at that draft's own
    # prefix; active rows share the output prefix, so the output window suffices.
    for j in range(L + 1):
        active[:, j] = S & live[:, None]
        q = target.rows_batch(ywin.hist, ywin.hlen)
        if mode is Mode.CONDITIONAL:
            s = np.where(S[:, :, None], races[:, j], np.inf).min(axis=1)
        else:
            s = races[:, j].min(axis=1)
        y = race_scores(s, q).argmin(-1)
        tokens[live, j] = y[live]
        if j == L:
            tau[live] = L + 1
            break
        S &= drafts[:, :, j] == y[:, None]
        stop = live & ~S.any(axis=1)
        tau[stop] = j + 1
        live &= ~stop
        ywin.push(y, live)
        if not live.any():
            break
    return EpisodeBatch(drafts, tokens, tau, active, mode)


def generate_sequences(target: TabularLM, drafters, K: int, L: int, mode: Mode | str,
                       seed: SeedContext, trials: np.ndarray, c: Sequence[int], length: int,
                       max_rounds: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Run rounds until every trial has emitted ``length`` tokens.

    Round ``r`` of trial ``t`` uses ``seed.child(t, r)`` and continues from the
    tokens emitted so far.  Returns ``(sequences, rounds)`` where sequences
    is ``(M, length)`` and ``rounds[t]`` counts the verification rounds used.
    """
    trials = np.asarray(trials)
    M = trials.size
    win = Window.of(c, M, target.C)
    out = np.full((M, length), -1, dtype=np.int64)
    filled = np.zeros(M, dtype=np.int64)
    rounds = np.zeros(M, dtype=np.int64)
    max_rounds = length if max_rounds is None else max_rounds
    for r in range(max_rounds):
        need = filled < length
        if not need.any():
            break
        idx = np.flatnonzero(need)
        b = simulate_episodes(target, drafters, K, L, mode, seed,
                              (trials[idx], np.full(idx.size, r)), win.take(idx))
        rounds[idx] += 1
        sub = win.take(idx)
        for j in range(L + 1):
            emitted = b.tau > j
            pos = filled[idx] + j
            put = emitted & (pos < length)
            out[idx[put], pos[put]] = b.tokens[put, j]
            sub.push(b.tokens[:, j], emitted)
        filled[idx] += b.tau
        win.hist[idx], win.hlen[idx] = sub.hist, sub.hlen
    return out, rounds
