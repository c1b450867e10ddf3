"""Configuration-driven experiment runner.

A config is a flat YAML mapping.  ``seed`` and ``out`` are common; every
other key belongs to the command and unknown keys are rejected.  Each
command draws its randomness from ``SeedContext(seed, (command_id, ...))``
and every record names the tag prefix under which its trials live, so trial
``t`` of a record replays from ``SeedContext(seed, prefix + (t,))``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from . import __version__
from .bounds import (lml_bound, lml_relaxed_bound, maximal_coupling_prob, strong_variant_accept_bound,
                     weak_coupling_bound, wz_error_bound)
from .coupling import (as_probs, gls_nested, independent_batch, make_categorical, nested_accept,
                       race_tensor, random_categorical, recursive_rejection_batch)
from .errors import GLSError, InvalidConfig, IoFailure
from .rng import SeedContext, exp_array
from .specdec import (Mode, TabularLM, Window, draft_generate, invariance_check,
                      simulate_episodes, step_races)
from .stats import binomial_stderr, summarize
from .wz import RDGrid, Scheme, example_models, run_rd_sweep, simulate_discrete

COMMAND_IDS = {"bound": 0, "couple": 1, "toy-sweep": 2, "specdec": 3, "wz-discrete": 4, "gaussian-rd": 5}

DEFAULTS: dict[str, dict[str, Any]] = {
    "bound": dict(p=None, q=None, K=[1, 2, 4, 8]),
    "couple": dict(p=None, q=None, K=[1, 2, 4, 8], trials=100_000,
                   methods=["gls", "rejection", "independent"], chunk=100_000),
    "toy-sweep": dict(pairs=100, N=10, K_max=20, trials=10_000, chunk=100_000),
    "specdec": dict(N=3, C=2, K=[1, 2, 4], L=2, modes=["conditional", "strong"], episodes=10_000,
                    context=[0], drafter_temperature=2.0, invariance_episodes=2_000),
    "wz-discrete": dict(models=["independent", "symmetric", "skewed"], K=[1, 2, 4], L_max=[1, 2, 4],
                        trials=100_000, schemes=["gls", "baseline"]),
    "gaussian-rd": dict(K=[1, 2, 3, 4], L_max=[2, 4, 8, 16, 32, 64],
                        sigma2=[0.01, 0.008, 0.006, 0.005, 0.003, 0.002, 0.001], N=2**15,
                        selection_trials=10_000, eval_trials=10_000, var_t_given_a=0.5,
                        metric="mean_db"),
}
_COMMON = {"seed": 0, "out": None, "command": None}


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    seed: int
    params: Mapping[str, Any] = field(default_factory=dict)
    out: str | None = None

    @classmethod
    def from_mapping(cls, command: str, raw: Mapping[str, Any] | None) -> "ExperimentConfig":
        if command not in DEFAULTS:
            raise InvalidConfig(f"unknown command {command!r}")
        raw = dict(raw or {})
        if raw.get("command") not in (None, command):
            raise InvalidConfig(f"config is for {raw['command']!r}, not {command!r}")
        unknown = set(raw) - set(DEFAULTS[command]) - set(_COMMON)
        if unknown:
            raise InvalidConfig(f"unknown keys for {command}: {sorted(unknown)}")
        params = {**DEFAULTS[command], **{k: v for k, v in raw.items() if k not in _COMMON}}
        seed = raw.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise InvalidConfig("seed must be a non-negative integer")
        cfg = cls(command, seed, params, raw.get("out"))
        cfg.validate()
        return cfg

    def with_overrides(self, seed: int | None = None, out: str | None = None) -> "ExperimentConfig":
        return ExperimentConfig(self.command, self.seed if seed is None else seed, self.params,
                                self.out if out is None else out)

    def validate(self) -> None:
        for k, v in self.params.items():
            vals = v if isinstance(v, list) else [v]
            if k in ("trials", "pairs", "episodes", "N", "C", "L", "K_max", "chunk", "K", "L_max",
                     "selection_trials", "eval_trials", "invariance_episodes"):
                if not vals or any(not isinstance(x, int) or x < 1 for x in vals):
                    raise InvalidConfig(f"{k} must be positive integers")
            if isinstance(v, list) and not v and k != "context":
                raise InvalidConfig(f"{k} must be non-empty")

    def root(self) -> SeedContext:
        return SeedContext(self.seed, (COMMAND_IDS[self.command],))


def load_config(path: str | Path, command: str) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InvalidConfig(f"config is not valid YAML: {exc}") from exc
    if raw is not None and not isinstance(raw, dict):
        raise InvalidConfig("config must be a mapping")
    return ExperimentConfig.from_mapping(command, raw)


def _tags(ctx: SeedContext) -> str:
    return ".".join(str(t) for t in ctx.tags)


# Monte Carlo acceptance curves


def accept_counts(method: str, p, q, K_max: int, seed: SeedContext, trials: int,
                  chunk: int = 100_000) -> np.ndarray:
    """Accepted-trial counts for ``K = 1..K_max`` from one nested run.

    GLS shares races across ``K`` (prefix rows), recursive rejection reads
    acceptance as ``first < K`` and the independent baseline checks the first
    ``K`` proposals, so one pass gives the whole curve.
    """
    p, q = as_probs(p), as_probs(q)
    N = q.size
    counts = np.zeros(K_max, dtype=np.int64)
    for lo in range(0, trials, chunk):
        t = np.arange(lo, min(lo + chunk, trials))
        if method == "gls":
            y, x = gls_nested(p, q, race_tensor(seed, t, K_max, N))
            acc = nested_accept(y, x)
        elif method == "rejection":
            _, _, first = recursive_rejection_batch([p] * K_max, q, seed, t)
            acc = first[:, None] < np.arange(1, K_max + 1)[None, :]
        elif method == "independent":
            y, x = independent_batch(p, q, K_max, seed, t)
            acc = np.logical_or.accumulate(x == y[:, None], axis=1)
        else:
            raise InvalidConfig(f"unknown method {method!r}")
        counts += acc.sum(axis=0)
    return counts


_METHOD_IDS = {"gls": 0, "rejection": 1, "independent": 2}


def _pair(params) -> tuple[np.ndarray, np.ndarray]:
    if params["p"] is None or params["q"] is None:
        raise InvalidConfig("p and q are required")
    try:
        p, q = make_categorical(params["p"]).probs, make_categorical(params["q"]).probs
    except GLSError as exc:
        raise InvalidConfig(str(exc)) from exc
    if p.size != q.size:
        raise InvalidConfig("p and q must have the same length")
    return p, q


def _run_bound(cfg: ExperimentConfig) -> list[dict]:
    p, q = _pair(cfg.params)
    rows = []
    for K in cfg.params["K"]:
        vals = [("lml", 0, lml_bound(p, q, K)), ("lml_relaxed", 0, lml_relaxed_bound(p, q, K)),
                ("maximal_coupling", 0, maximal_coupling_prob(p, q)),
                ("weak_coupling", 0, weak_coupling_bound(p, q))]
        vals += [("strong_variant", J, strong_variant_accept_bound(p, q, K, J)) for J in range(1, K + 1)]
        rows += [dict(K=K, kind=kind, J=J, value=v, seed_tags="") for kind, J, v in vals]
    return rows


def _run_couple(cfg: ExperimentConfig) -> list[dict]:
    p, q = _pair(cfg.params)
    Ks = sorted(cfg.params["K"])
    n = cfg.params["trials"]
    rows = []
    for method in cfg.params["methods"]:
        if method not in _METHOD_IDS:
            raise InvalidConfig(f"unknown method {method!r}")
        ctx = cfg.root().child(_METHOD_IDS[method])
        counts = accept_counts(method, p, q, Ks[-1], ctx, n, cfg.params["chunk"])
        for K in Ks:
            rate = counts[K - 1] / n
            rows.append(dict(method=method, K=K, accept_rate=rate, stderr=binomial_stderr(rate, n),
                             trials=n, lml_bound=lml_bound(p, q, K),
                             maximal_coupling=maximal_coupling_prob(p, q),
                             weak_coupling=weak_coupling_bound(p, q), seed_tags=_tags(ctx)))
    return rows


def toy_pairs(root: SeedContext, pairs: int, N: int):
    """Random ``(p, q)`` pairs; pair ``j`` reads ``root.child(0, j, 0|1, i)``."""
    for j in range(pairs):
        yield (random_categorical(root.child(0, j, 0), N).probs,
               random_categorical(root.child(0, j, 1), N).probs)


def _run_toy_sweep(cfg: ExperimentConfig) -> list[dict]:
    P = cfg.params
    n, Kmax = P["trials"], P["K_max"]
    root = cfg.root()
    rates = {m: np.zeros((P["pairs"], Kmax)) for m in _METHOD_IDS}
    rows = []
    for j, (p, q) in enumerate(toy_pairs(root, P["pairs"], P["N"])):
        for m, mid in _METHOD_IDS.items():
            ctx = root.child(1, j, mid)
            rates[m][j] = accept_counts(m, p, q, Kmax, ctx, n, P["chunk"]) / n
            for K in range(1, Kmax + 1):
                r = rates[m][j, K - 1]
                rows.append(dict(pair=j, method=m, K=K, accept_rate=r, stderr=binomial_stderr(r, n),
                                 trials=n, seed_tags=_tags(ctx)))
        for K in range(1, Kmax + 1):
            for kind, v in (("lml", lml_bound(p, q, K)), ("weak_coupling", weak_coupling_bound(p, q)),
                            ("maximal_coupling", maximal_coupling_prob(p, q))):
                rows.append(dict(pair=j, method=kind, K=K, accept_rate=v, stderr=0.0, trials=0,
                                 seed_tags=""))
    for m in _METHOD_IDS:
        for K in range(1, Kmax + 1):
            r = rates[m][:, K - 1]
            se = math.sqrt(float(np.sum(r * (1 - r) / n))) / r.size
            rows.append(dict(pair="mean", method=m, K=K, accept_rate=float(r.mean()), stderr=se,
                             trials=n * r.size, seed_tags=_tags(root.child(1))))
    return rows


def random_lm(seed: SeedContext, N: int, C: int) -> TabularLM:
    """Every row drawn uniformly from the simplex; row ``r`` reads ``seed.child(r, i)``."""
    n = sum(N**m for m in range(C + 1))
    w = exp_array(seed, np.arange(n)[:, None], np.arange(N))
    return TabularLM(N, C, w / w.sum(axis=1, keepdims=True))


def _run_specdec(cfg: ExperimentConfig) -> list[dict]:
    P = cfg.params
    root = cfg.root()
    N, C, L = P["N"], P["C"], P["L"]
    target = random_lm(root.child(0), N, C)
    drafter_a = target.tempered(P["drafter_temperature"])
    drafter_b = random_lm(root.child(1), N, C)
    c = tuple(P["context"])
    if any(not 0 <= t < N for t in c):
        raise InvalidConfig("context symbols must lie in 0..N-1")
    M = P["episodes"]
    rows = []
    taus = {}
    for K in P["K"]:
        for mode in P["modes"]:
            ctx = root.child(2, K)
            b = simulate_episodes(target, drafter_a, K, L, mode, ctx, (np.arange(M),), Window.of(c, M, C))
            taus[K, mode] = b.tau
            s = summarize(b.tau)
            rows.append(dict(kind="block_efficiency", K=K, mode=Mode(mode).value, verifier="gls",
                             value=s.mean, stderr=s.stderr, episodes=M, seed_tags=_tags(ctx)))
        if {"conditional", "strong"} <= set(P["modes"]):
            d = summarize(taus[K, "strong"] - taus[K, "conditional"])
            rows.append(dict(kind="strong_minus_conditional", K=K, mode="paired", verifier="gls",
                             value=d.mean, stderr=d.stderr, episodes=M, seed_tags=_tags(root.child(2, K))))
        # invariance verdicts on the per-episode reference path
        Mi = P["invariance_episodes"]
        ctx = root.child(3, K)
        viol = {("conditional", "gls"): 0, ("conditional", "rejection"): 0, ("strong", "gls"): 0}
        drafters = {"a": [drafter_a] * K, "b": [drafter_b] * K}
        for e in range(Mi):
            s = ctx.child(e)
            races = step_races(s, K, N, L)
            da = draft_generate(drafter_a, c, L, races)
            db = draft_generate(drafter_b, c, L, races)
            for verifier in ("gls", "rejection"):
                v = invariance_check(target, s, c, da, da, ("a", "b"), Mode.CONDITIONAL, drafters, verifier)
                viol["conditional", verifier] += not v.holds
            viol["strong", "gls"] += not invariance_check(target, s, c, da, db, ("a", "b"), Mode.STRONG).holds
        for (mode, verifier), count in viol.items():
            rows.append(dict(kind="invariance_violations", K=K, mode=mode, verifier=verifier,
                             value=count, stderr=0.0, episodes=Mi, seed_tags=_tags(ctx)))
    return rows


def _run_wz_discrete(cfg: ExperimentConfig) -> list[dict]:
    P = cfg.params
    models = example_models()
    rows = []
    for mi, name in enumerate(P["models"]):
        if name not in models:
            raise InvalidConfig(f"unknown model {name!r}; known: {sorted(models)}")
        model = models[name]
        for K in P["K"]:
            for L in P["L_max"]:
                for scheme in P["schemes"]:
                    ctx = cfg.root().child(mi, K, L, list(Scheme).index(Scheme(scheme)))
                    b = simulate_discrete(model, K, L, ctx, np.arange(P["trials"]), scheme)
                    rate = 1.0 - b.matched.mean()
                    rows.append(dict(model=name, K=K, L_max=L, scheme=scheme, mismatch_rate=rate,
                                     stderr=binomial_stderr(rate, P["trials"]),
                                     bound=wz_error_bound(model, K, L), trials=P["trials"],
                                     seed_tags=_tags(ctx)))
    return rows


def _run_gaussian_rd(cfg: ExperimentConfig) -> list[dict]:
    P = cfg.params
    grid = RDGrid(tuple(P["K"]), tuple(P["L_max"]), tuple(P["sigma2"]), P["N"], P["selection_trials"],
                  P["eval_trials"], P["var_t_given_a"])
    res = run_rd_sweep(grid, cfg.root(), metric=P["metric"])
    rows = res.records()
    for r in rows:
        r["seed_tags"] = _tags(cfg.root().child(0 if r["run"] == "selection" else 1))
    return rows


_RUNNERS = {"bound": _run_bound, "couple": _run_couple, "toy-sweep": _run_toy_sweep,
            "specdec": _run_specdec, "wz-discrete": _run_wz_discrete, "gaussian-rd": _run_gaussian_rd}


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return v


def write_records(path: Path, rows: list[dict]) -> None:
    fields = list(dict.fromkeys(k for r in rows for k in r))
    try:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: _fmt(v) for k, v in r.items()})
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


@dataclass
class RunReport:
    records: list[dict]
    records_path: Path | None
    manifest_path: Path | None


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunReport:
    """Run one command and, if an output directory is given, write its files.

    Writes ``records.csv`` and ``manifest.json`` (seed, full config, version).
    Nothing time- or host-dependent goes into either file, so reruns are
    byte-identical.
    """
    rows = _RUNNERS[cfg.command](cfg)
    out_dir = out_dir if out_dir is not None else cfg.out
    if out_dir is None:
        return RunReport(rows, None, None)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out}: {exc}") from exc
    rec = out / "records.csv"
    write_records(rec, rows)
    manifest = dict(command=cfg.command, seed=cfg.seed, command_tag=COMMAND_IDS[cfg.command],
                    config=dict(cfg.params), records=rec.name, n_records=len(rows), version=__version__)
    man = out / "manifest.json"
    try:
        man.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {man}: {exc}") from exc
    return RunReport(rows, rec, man)
