import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from sle_lab.errors import DegenerateWeightsError, ParameterError
from sle_lab.stats import (
    critical_value, ecdf, effective_size, ks_distance, ks_two_sample, weighted_ks,
)


def brute_ks(x, y):
    grid = np.concatenate([x, y])
    fx = (x[None, :] <= grid[:, None]).mean(1)
    fy = (y[None, :] <= grid[:, None]).mean(1)
    return np.abs(fx - fy).max()


def test_identical_and_disjoint_samples():
    x = np.arange(10.0)
    assert ks_distance(x, x) == 0.0
    assert ks_distance(x, x + 100) == 1.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=1, max_size=40),
       st.lists(st.integers(-20, 20), min_size=1, max_size=40))
def test_uniform_weights_match_brute_force_and_scipy(xs, ys):
    x, y = np.array(xs, float), np.array(ys, float)
    d = ks_distance(x, y, np.full(x.size, 0.3))
    assert abs(d - brute_ks(x, y)) <= 1e-12
    assert abs(d - sps.ks_2samp(x, y, method="asymp").statistic) <= 1e-12


def test_weighted_ecdf():
    x, c = ecdf([3.0, 1.0, 2.0], [1.0, 2.0, 1.0])
    assert list(x) == [1.0, 2.0, 3.0]
    assert np.allclose(c, [0.5, 0.75, 1.0])


def test_effective_size():
    assert effective_size(np.ones(50)) == pytest.approx(50)
    assert effective_size([1.0, 1.0, 2.0]) == pytest.approx(16 / 6)


def test_critical_value():
    n = m = 1000
    assert critical_value(n, m, 0.01) == pytest.approx(1.6276 * np.sqrt(2 / 1000), rel=1e-4)


def test_weighted_ks_degenerate_weights():
    x = np.arange(100.0)
    w = np.ones(100)
    w[0] = 1e6
    with pytest.raises(DegenerateWeightsError):
        weighted_ks(x, w, x)
    with pytest.raises(DegenerateWeightsError):
        weighted_ks(x, np.r_[0.0, np.ones(99)], x)
    with pytest.raises(ParameterError):
        weighted_ks(x, np.ones(3), x)


def test_weighted_ks_accepts_same_law_and_rejects_shift():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=2000), rng.normal(size=2000)
    w = rng.uniform(0.5, 1.5, size=2000)
    assert weighted_ks(x, w, y).passed
    assert not weighted_ks(x + 0.3, w, y).passed


def test_importance_weights_recover_the_target_law():
    rng = np.random.default_rng(2)
    x = rng.normal(size=4000)
    w = np.exp(0.5 * x - 0.125)  # density ratio N(0.5, 1) / N(0, 1)
    y = rng.normal(0.5, 1.0, size=4000)
    res = weighted_ks(x, w, y)
    assert res.passed and res.n_eff < 4000


def test_permutation_p_value():
    rng = np.random.default_rng(3)
    x, y = rng.normal(size=200), rng.normal(size=200)
    res = weighted_ks(x, np.ones(200), y, n_perm=200)
    assert 0.01 < res.p_value <= 1.0
    shifted = weighted_ks(x + 1.0, np.ones(200), y, n_perm=200)
    assert shifted.p_value < 0.01


def test_classical_two_sample():
    d, p = ks_two_sample([1, 2, 3], [1, 2, 3])
    assert d == 0.0 and p == pytest.approx(1.0)
