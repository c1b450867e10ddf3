import math

import numpy as np
import pytest

from glskit.bounds import wz_error_bound
from glskit.coupling import RaceMatrix
from glskit.errors import AllZeroWeights, InconsistentModel, InvalidConfig, NoCandidate
from glskit.rng import SeedContext
from glskit.wz import (DiscreteWZModel, GaussianWZConfig, ImportanceList, Metric, RDGrid, Scheme,
                       baseline_decode, baseline_decode_continuous, code_discrete, decode_index_discrete,
                       derive_p_w_given_t, encode_decode_continuous, encode_index_discrete, example_models,
                       gaussian_p_w_given_t, importance_weights, mmse_reconstruct, run_rd_sweep,
                       simulate_discrete, source_and_side, summarize_errors, sweep_trials, trial_db)

from conftest import tv


def two_symbol_model():
    return DiscreteWZModel([1.0], [[1.0]], [[0.1, 0.9]])


def test_derive_p_w_given_t():
    m = DiscreteWZModel([0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]], [[0.2, 0.8], [0.6, 0.4]])
    np.testing.assert_allclose(derive_p_w_given_t(m), [[0.2, 0.8], [0.6, 0.4]])
    m = DiscreteWZModel([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], [[0.2, 0.8], [0.6, 0.4]])
    np.testing.assert_allclose(m.p_w_given_t, [[0.4, 0.6], [0.4, 0.6]])
    with pytest.raises(InconsistentModel):
        DiscreteWZModel([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], [[0.2, 0.8], [0.6, 0.4]],
                        p_w_given_t=[[0.2, 0.8], [0.6, 0.4]])
    with pytest.raises(InconsistentModel):
        DiscreteWZModel([0.5, 0.5], [[1.0, 0.0], [1.0, 0.0]], [[0.2, 0.8], [0.6, 0.4]])


def test_encoder_decoder_hand_trace():
    model = two_symbol_model()
    races = RaceMatrix(np.array([[0.2, 0.9]]))
    y, m = encode_index_discrete(model, 0, races, [0, 1])
    # scores 0.2/0.1 = 2 and 0.9/0.9 = 1
    assert (y, m) == (1, 1)
    assert decode_index_discrete(model, 0, m, 0, races, [0, 1]) == 1
    with pytest.raises(NoCandidate):
        decode_index_discrete(DiscreteWZModel([1.0], [[1.0]], [[1.0, 0.0]]), 0, 1, 0, races, [0, 1])


def test_single_label_always_matches_with_k1(seed):
    for name, model in example_models().items():
        b = simulate_discrete(model, 1, 1, seed, np.arange(20_000))
        if np.allclose(model.p_w_given_a, model.p_w_given_a[0]):
            assert b.matched.all(), name
        assert np.all(b.m == 0)


def test_independent_model_bound_formula():
    model = example_models()["independent"]
    for K in (1, 2, 4):
        for L in (1, 2, 4):
            assert wz_error_bound(model, K, L) == pytest.approx(1 / (1 + K * L), abs=1e-12)


def test_encoder_marginal(seed):
    model = example_models()["skewed"]
    n = 1_000_000
    b = simulate_discrete(model, 4, 2, seed, np.arange(n))
    for a in range(3):
        sel = b.a == a
        emp = np.bincount(b.y[sel], minlength=5) / sel.sum()
        assert tv(emp, model.p_w_given_a[a]) < 0.005 + 3 / math.sqrt(sel.sum())


@pytest.mark.parametrize("name", ["independent", "symmetric", "skewed"])
def test_mismatch_below_bound(seed, name):
    model = example_models()[name]
    n = 50_000
    for K in (1, 2, 4):
        for L in (1, 2, 4):
            rate = 1 - simulate_discrete(model, K, L, seed.child(K, L), np.arange(n)).matched.mean()
            bound = wz_error_bound(model, K, L)
            assert rate <= bound + 3 * math.sqrt(max(bound * (1 - bound), 1e-4) / n)


def test_more_decoders_help(seed):
    model = example_models()["symmetric"]
    n = 50_000
    rates = [simulate_discrete(model, K, 4, seed, np.arange(n)).matched.mean() for K in (1, 2, 4)]
    assert rates[0] < rates[1] < rates[2]


def test_baseline_k1_equals_gls(seed):
    for model in example_models().values():
        g = simulate_discrete(model, 1, 2, seed, np.arange(5000))
        b = simulate_discrete(model, 1, 2, seed, np.arange(5000), Scheme.BASELINE)
        np.testing.assert_array_equal(g.x, b.x)
        np.testing.assert_array_equal(g.y, b.y)


def test_baseline_decoders_agree_on_equal_side_info(seed):
    model = example_models()["symmetric"]
    races = RaceMatrix(np.random.default_rng(0).exponential(size=(3, 8)))
    labels = [0, 1, 0, 1, 1, 0, 0, 1]
    y, m = encode_index_discrete(model, 2, races, labels, Scheme.BASELINE)
    assert len({baseline_decode(model, 1, m, k, races, labels) for k in range(3)}) == 1


def test_code_discrete_matches_batch(seed):
    model = example_models()["skewed"]
    for e in range(200):
        s = seed.child(e)
        for scheme in Scheme:
            out = code_discrete(model, 3, 2, s, scheme)
            b = simulate_discrete(model, 3, 2, s, np.array([0]), scheme)
            assert out.y == b.y[0] and out.m == b.m[0] and out.x == tuple(b.x[0])


def test_gaussian_conditionals():
    cfg = GaussianWZConfig(0.5, 0.5)
    mean, var = gaussian_p_w_given_t(cfg, 1.5)
    assert mean == pytest.approx(1.0) and var == pytest.approx(1.5 - 1 / 1.5)
    cfg = GaussianWZConfig(0.01, 0.5)
    assert mmse_reconstruct(cfg, 1.0, 1.0) == pytest.approx(0.51 / 0.515)
    assert mmse_reconstruct(cfg, 0.0, 0.0) == 0.0
    with pytest.raises(InvalidConfig):
        GaussianWZConfig(0.0)


def test_importance_weights():
    cfg = GaussianWZConfig(1.0, 0.5, N=3, L_max=2)
    lst = ImportanceList(np.array([0.0, 1.0, -1.0]), np.array([0, 1, 0]), 2)
    w = importance_weights(cfg, lst, a=0.0)
    assert w.normalized.sum() == pytest.approx(1.0)
    # p(w|a)/p(w) for N(0,1) over N(0,2)
    ratio = np.exp(-0.5 * lst.u**2 + 0.25 * lst.u**2) * math.sqrt(2)
    np.testing.assert_allclose(w.unnormalized, ratio)
    d = importance_weights(cfg, lst, t=0.0, m=1)
    np.testing.assert_array_equal(d.normalized, [0.0, 1.0, 0.0])
    with pytest.raises(AllZeroWeights):
        importance_weights(cfg, ImportanceList(lst.u, np.zeros(3, dtype=int), 2), t=0.0, m=1)
    with pytest.raises(InvalidConfig):
        importance_weights(cfg, lst)


def test_continuous_baseline_k1_matches(seed):
    cfg = GaussianWZConfig(0.005, N=256, L_max=4)
    for e in range(50):
        s = seed.child(e)
        a, t = source_and_side(s, 1, 0.5)
        assert encode_decode_continuous(cfg, a, t, s) == baseline_decode_continuous(cfg, a, t, s)


def test_kernel_matches_reference(seed):
    sig2, Ls, K, N = [0.01, 0.002], [2, 8], 3, 512
    arr = sweep_trials(seed, np.arange(40), sig2, Ls, K, N, chunk=16)
    for n in range(40):
        s = seed.child(n)
        a, t = source_and_side(s, K, 0.5)
        for si, v in enumerate(sig2):
            for li, L in enumerate(Ls):
                cfg = GaussianWZConfig(v, 0.5, N, L)
                for Kp in range(1, K + 1):
                    for scheme in Scheme:
                        ref = encode_decode_continuous(cfg, a, t[:Kp], s, scheme)
                        assert arr.err[scheme][si, Kp - 1, li, n] == pytest.approx(ref.best_distortion,
                                                                                   rel=1e-9, abs=1e-15)
                        assert arr.hit[scheme][si, Kp - 1, li, n] == ref.matched


def test_sweep_is_deterministic(seed):
    a = sweep_trials(seed, np.arange(20), [0.01], [4], 2, 256)
    b = sweep_trials(seed, np.arange(20), [0.01], [4], 2, 256, chunk=7)
    for scheme in Scheme:
        np.testing.assert_array_equal(a.err[scheme], b.err[scheme])


def test_summaries():
    err = np.array([0.1, 0.01])
    db, _ = summarize_errors(err, Metric.MEAN_DB)
    assert db == pytest.approx(-15.0)
    db, _ = summarize_errors(err, Metric.MSE_DB)
    assert db == pytest.approx(10 * math.log10(0.055))
    assert np.isfinite(trial_db(np.array([0.0])))[0]


def test_small_sweep_shape(seed):
    grid = RDGrid((1, 2), (2, 8), (0.01, 0.003), 1024, 200, 200)
    res = run_rd_sweep(grid, seed)
    assert res.db(Scheme.GLS, 1, 2) == pytest.approx(res.db(Scheme.BASELINE, 1, 2))
    assert res.db(Scheme.GLS, 2, 8) < res.db(Scheme.GLS, 1, 2)
    recs = res.records()
    assert len(recs) == 2 * 2 * 2 * 2 * 2
    assert sum(r["selected"] for r in recs) == 2 * 2 * 2 * 2
