"""Property tests over random distributions and races."""

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from glskit.bounds import lml_bound, lml_relaxed_bound, maximal_coupling_prob, weak_coupling_bound
from glskit.coupling import RaceMatrix, gls_sample, make_categorical
from glskit.rng import SeedContext, derive_uniform
from glskit.specdec import TabularLM, Window

weights = st.integers(2, 8).flatmap(
    lambda n: st.tuples(
        arrays(np.float64, n, elements=st.floats(0.0, 1.0)).filter(lambda w: w.sum() > 1e-3),
        arrays(np.float64, n, elements=st.floats(0.0, 1.0)).filter(lambda w: w.sum() > 1e-3),
    )
)
race_rows = st.integers(1, 5)


@st.composite
def coupling_case(draw):
    wp, wq = draw(weights)
    K = draw(race_rows)
    s = draw(arrays(np.float64, (K, wp.size), elements=st.floats(1e-3, 30.0)))
    return make_categorical(wp), make_categorical(wq), RaceMatrix(s)


@given(coupling_case(), st.data())
def test_row_permutation_permutes_x_keeps_y(case, data):
    p, q, r = case
    perm = np.array(data.draw(st.permutations(range(r.K))))
    a = gls_sample(p, q, r)
    b = gls_sample(p, q, RaceMatrix(r.s[perm]))
    assert b.y == a.y
    assert b.x == tuple(a.x[k] for k in perm)


@given(coupling_case(), st.integers(-20, 20))
def test_scaling_races_changes_nothing(case, e):
    # powers of two scale exactly, so even floating-point ties are preserved
    p, q, r = case
    assert gls_sample(p, q, RaceMatrix(r.s * 2.0**e)) == gls_sample(p, q, r)


@given(coupling_case())
def test_outputs_in_support(case):
    p, q, r = case
    out = gls_sample(p, q, r)
    assert q.probs[out.y] > 0
    assert all(p.probs[x] > 0 for x in out.x)


@given(weights, st.integers(1, 30))
def test_bounds_in_unit_interval_and_ordered(w, K):
    p, q = make_categorical(w[0]), make_categorical(w[1])
    for v in (lml_bound(p, q, K), lml_relaxed_bound(p, q, K), maximal_coupling_prob(p, q), weak_coupling_bound(p, q)):
        assert -1e-12 <= v <= 1 + 1e-12
    assert weak_coupling_bound(p, q) <= maximal_coupling_prob(p, q) + 1e-12
    assert lml_bound(p, q, K) <= lml_bound(p, q, K + 1) + 1e-12


@given(weights, st.integers(1, 10))
def test_lml_k1_sits_between_weak_and_maximal(w, K):
    p, q = make_categorical(w[0]), make_categorical(w[1])
    v = lml_bound(p, q, 1)
    assert weak_coupling_bound(p, q) - 1e-12 <= v <= maximal_coupling_prob(p, q) + 1e-12


@given(st.integers(0, 2**64 - 1), st.lists(st.integers(0, 2**40), max_size=6))
@settings(max_examples=200)
def test_uniform_strictly_inside(master, tags):
    u = derive_uniform(SeedContext(master, tuple(tags)))
    assert 0 < u < 1


@given(st.integers(2, 4), st.integers(0, 3), st.data())
def test_window_index_matches_scalar(N, C, data):
    lm = TabularLM.random(N, C, np.random.default_rng(0))
    ctx = data.draw(st.lists(st.integers(0, N - 1), max_size=6))
    w = Window.of(ctx, 1, C)
    np.testing.assert_array_equal(lm.rows_batch(w.hist, w.hlen)[0], lm.row(ctx))
    extra = data.draw(st.integers(0, N - 1))
    w.push(np.array([extra]))
    np.testing.assert_array_equal(lm.rows_batch(w.hist, w.hlen)[0], lm.row(ctx + [extra]))
