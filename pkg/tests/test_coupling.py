import math

import numpy as np
import pytest

from glskit.coupling import (Categorical, CoupleOutcome, RaceMatrix, build_races, empirical_law, gls_batch,
                             gls_nested, gls_sample, gls_sample_heterogeneous, independent_batch,
                             independent_sample, make_categorical, nested_accept, race_tensor,
                             random_categorical, recursive_rejection_batch, recursive_rejection_sample,
                             truncate_top, tv_distance)
from glskit.errors import AlphabetMismatch, EmptySupport, NegativeMass, ZeroTotalMass
from glskit.rng import SeedContext

from conftest import tv


def test_make_categorical():
    np.testing.assert_array_equal(make_categorical([2, 2]).probs, [0.5, 0.5])
    np.testing.assert_array_equal(make_categorical([1, 0, 0]).probs, [1, 0, 0])
    with pytest.raises(NegativeMass):
        make_categorical([-1, 2])
    with pytest.raises(ZeroTotalMass):
        make_categorical([0, 0])
    with pytest.raises(EmptySupport):
        Categorical(np.array([]))
    with pytest.raises(ValueError):
        Categorical(np.array([0.5, 0.6]))


def test_tv_distance():
    assert tv_distance([0.3, 0.7], [0.3, 0.7]) == 0
    assert tv_distance([1, 0], [0, 1]) == 1
    assert math.isclose(tv_distance([0.5, 0.5], [0.9, 0.1]), 0.4)
    with pytest.raises(AlphabetMismatch):
        tv_distance([1.0], [0.5, 0.5])


def test_truncate_top():
    np.testing.assert_allclose(truncate_top([0.1, 0.5, 0.4], 2).probs, [0, 5 / 9, 4 / 9])
    np.testing.assert_allclose(truncate_top([0.1, 0.5, 0.4], 5).probs, [0.1, 0.5, 0.4])


def test_build_races(seed):
    a, b = build_races(seed, 3, 4), build_races(seed, 3, 4)
    np.testing.assert_array_equal(a.s, b.s)
    one = build_races(seed, 1, 1)
    assert one.s.shape == (1, 1) and one.s[0, 0] > 0
    big = race_tensor(seed, np.arange(1000), 10, 100)
    n = big.size
    assert abs(big.mean() - 1) < 3 / math.sqrt(n)
    with pytest.raises(ValueError):
        RaceMatrix(np.array([[0.0, 1.0]]))


def test_hand_trace():
    races = RaceMatrix(np.array([[0.2, 0.9]]))
    out = gls_sample([0.5, 0.5], [0.1, 0.9], races)
    assert out.x == (0,)  # 0.4 < 1.8
    assert out.y == 1  # 2.0 > 1.0
    assert not out.accepted


def test_zero_mass_never_wins_and_ties_go_low():
    races = RaceMatrix(np.array([[1e-9, 5.0, 5.0]]))
    out = gls_sample([0.0, 0.5, 0.5], [0.0, 0.5, 0.5], races)
    assert out.x == (1,) and out.y == 1


def test_identical_distributions_always_accept(seed):
    q = random_categorical(seed.child(0), 8).probs
    y, x = gls_batch(q, q, race_tensor(seed, np.arange(20_000), 3, 8))
    assert np.all((x == y[:, None]).any(1))


def test_point_mass_proposal_matches_q_first(seed):
    n = 1_000_000
    y, x = gls_batch([1.0, 0.0], [0.7, 0.3], race_tensor(seed, np.arange(n), 1, 2))
    acc = (x[:, 0] == y).mean()
    assert abs(acc - 0.7) < 3 * math.sqrt(0.21 / n)


def test_heterogeneous():
    s = RaceMatrix(np.array([[0.3, 0.2, 1.1], [0.5, 0.4, 0.1]]))
    p, q = [0.2, 0.3, 0.5], [0.1, 0.6, 0.3]
    assert gls_sample_heterogeneous([p, p], q, s) == gls_sample(p, q, s)
    assert gls_sample_heterogeneous([q, q], q, s).accepted
    cover = gls_sample_heterogeneous([[1, 0], [0, 1]], [0.4, 0.6], RaceMatrix(np.array([[1.0, 2.0], [3.0, 0.5]])))
    assert cover.x == (0, 1) and cover.accepted
    with pytest.raises(AlphabetMismatch):
        gls_sample_heterogeneous([p], q, s)


def test_nested_matches_direct(seed):
    rng = np.random.default_rng(0)
    p, q = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
    s = race_tensor(seed, np.arange(2000), 6, 5)
    yn, xn = gls_nested(p, q, s)
    acc = nested_accept(yn, xn)
    for K in range(1, 7):
        y, x = gls_batch(p, q, s[:, :K])
        np.testing.assert_array_equal(y, yn[:, K - 1])
        np.testing.assert_array_equal(acc[:, K - 1], (x == y[:, None]).any(1))


def test_independent_baseline(seed):
    n = 1_000_000
    N = 5
    u = np.full(N, 1 / N)
    y, x = independent_batch(u, u, 1, seed, np.arange(n))
    acc = (x[:, 0] == y).mean()
    assert abs(acc - 1 / N) < 3 * math.sqrt(0.16 / n)
    assert independent_sample([1, 0], [1, 0], 3, seed).accepted
    y, x = independent_batch([0.5, 0.5], [0.5, 0.5], 2, seed.child(1), np.arange(n))
    acc = (x == y[:, None]).any(1).mean()
    assert abs(acc - 0.75) < 3 * math.sqrt(0.1875 / n)


def test_recursive_rejection(seed):
    q = [0.2, 0.5, 0.3]
    assert recursive_rejection_sample([q], q, seed).accepted
    rng = np.random.default_rng(5)
    p, q = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))
    n = 1_000_000
    y, x, first = recursive_rejection_batch([p], q, seed, np.arange(n))
    acc = (first == 0).mean()
    target = 1 - tv_distance(p, q)
    assert abs(acc - target) < 3 * math.sqrt(target * (1 - target) / n)
    P = rng.dirichlet(np.ones(6), 4)
    y, x, first = recursive_rejection_batch(list(P), q, seed.child(2), np.arange(n))
    assert tv(empirical_law(y, 6), q) < 0.005
    for k in range(4):
        assert tv(empirical_law(x[:, k], 6), P[k]) < 0.005


def test_rejection_nested_truncation(seed):
    rng = np.random.default_rng(6)
    P, q = rng.dirichlet(np.ones(4), 5), rng.dirichlet(np.ones(4))
    _, _, first = recursive_rejection_batch(list(P), q, seed, np.arange(3000))
    for K in (1, 2, 3):
        _, _, fk = recursive_rejection_batch(list(P[:K]), q, seed, np.arange(3000))
        np.testing.assert_array_equal(fk < K, first < K)


def test_outcome_flag():
    assert CoupleOutcome(2, (0, 2)).accepted
    assert not CoupleOutcome(1, (0, 2)).accepted


def test_random_categorical(seed):
    a = random_categorical(seed, 10)
    assert math.isclose(a.probs.sum(), 1.0) and np.all(a.probs > 0)
    np.testing.assert_array_equal(a.probs, random_categorical(seed, 10).probs)
