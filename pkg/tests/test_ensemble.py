import warnings

import numpy as np
import pytest

from sle_lab import ensemble as ens
from sle_lab.conformal_maps import compose_apply, compose_jet
from sle_lab.experiments import ExperimentConfig, integral_identity_residual
from sle_lab.sde_drivers import RngSpec, build_pair_driver


def make_pair(seed=0, kappa=3.0, n=200, dt=1e-4, zero_noise=False, stream=0):
    d = build_pair_driver(kappa, 0.0, 1.0, dt, n, RngSpec(seed, stream, zero_noise))
    return ens.EnsemblePair.from_driver(d)


@pytest.fixture(scope="module")
def pair():
    return make_pair()


def test_exponents():
    assert ens.alpha(2.0) == pytest.approx(1.0)
    assert ens.lam(8 / 3) == pytest.approx(0.0, abs=1e-14)
    assert ens.lam(2.0) == pytest.approx(2.0)
    assert ens.alpha(6.0) == 0.0


def test_remainder_map_with_empty_other_hull_is_identity(pair):
    assert len(ens.remainder_map(pair, 1, 100, 0)) == 0
    A = ens.compute_A(pair, 0, 0)
    assert A.a1 == (0.0, 1.0, 0.0, 0.0) and A.a2 == (1.0, 1.0, 0.0, 0.0)
    assert ens.compute_N(A) == 1.0


def test_A_with_one_chain_frozen_at_zero(pair):
    i1 = 150
    A = ens.compute_A(pair, i1, 0)
    assert A.a1 == (pair.tip_value(1, i1), 1.0, 0.0, 0.0)
    ref = compose_jet(pair.comp1.prefix(i1), 1.0)
    assert np.allclose(A.a2, tuple(ref), rtol=1e-8, atol=1e-10)
    assert ens.compute_N(A) == pytest.approx(ens.N_axis(pair, 1, i1), rel=1e-8)


def test_remainder_map_normalizes_the_other_hull(pair):
    """phi_{2,t1} maps the image of hull 2 under chain 1 to a slit-free half-plane."""
    i1, i2 = 120, 160
    R = ens.remainder_map(pair, 2, i2, i1)
    x = compose_apply(pair.comp2.prefix(i2), np.array([-3.0, 4.0 + 0j]))
    y = compose_apply(R, x)
    assert np.all(y.imag == 0) and y[0].real < y[1].real


def test_A_matches_finite_differences(pair):
    i1, i2 = 150, 150
    A = ens.compute_A(pair, i1, i2)
    R = ens.remainder_map(pair, 1, i1, i2)
    w, h = pair.tip_value(1, i1), 1e-4
    f = lambda x: compose_apply(R, complex(x)).real  # noqa: E731
    fd1 = (f(w + h) - f(w - h)) / (2 * h)
    fd2 = (f(w + h) - 2 * f(w) + f(w - h)) / h**2
    assert fd1 == pytest.approx(A.a1[1], rel=1e-4)
    assert fd2 == pytest.approx(A.a1[2], rel=1e-3, abs=1e-6)


def test_N_positive_on_random_pairs():
    for s in range(50):
        p = make_pair(seed=s, n=100)
        assert ens.compute_N(ens.compute_A(p, 100, 100)) > 0


def test_integral_vanishes_on_the_axes(pair):
    assert ens.integral_I(pair, 0, 150) == 0.0
    assert ens.integral_I(pair, 150, 0) == 0.0
    assert ens.integral_I_2d(pair, 0, 150) == 0.0


def test_integral_identity_with_zero_noise():
    cfg = ExperimentConfig(kappa=3.0, dt=2e-4)
    r1, i_closed, i_brute = integral_identity_residual(cfg, 2e-4)
    r2, _, _ = integral_identity_residual(cfg, 1e-4)
    assert i_closed > 0 and r1 <= 0.02 and r2 < r1


def test_quadrature_warning_is_optional(pair):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ens.integral_I(pair, 200, 200, warn=False)


def test_M_is_one_on_the_axes(pair):
    for i1, i2 in ((0, 0), (120, 0), (0, 180)):
        rec = ens.compute_M(pair, i1, i2)
        assert rec.M == pytest.approx(1.0, abs=1e-8)
        assert rec.valid


def test_kappa_eight_thirds_has_no_integral_term():
    p = make_pair(kappa=8 / 3, n=100)
    rec = ens.compute_M(p, 100, 100)
    assert rec.I == 0.0 and rec.lam == pytest.approx(0.0, abs=1e-14)


def test_M_finite_positive_on_many_samples():
    vals = [ens.compute_M(make_pair(seed=7, stream=s, n=150), 150, 150).M for s in range(60)]
    assert np.all(np.isfinite(vals)) and np.all(np.array(vals) > 0)
    assert max(vals) < 10 and min(vals) > 0.1


def test_record_row_layout(pair):
    rec = ens.compute_M(pair, 100, 100)
    row = rec.as_row()
    assert len(row) == len(ens.MartingaleRecord.CSV_HEADER)
    assert row[-2] == rec.M


def test_time_derivative_identity(pair):
    assert ens.time_derivative_check(pair, 150, 0, 1e-3) == (0.0, 0.0)
    for j in (1, 2):
        r_value, r_slope = ens.time_derivative_check(pair, 150, 150, 1e-3, j=j)
        assert r_value <= 0.05 and r_slope <= 0.05


def test_commutation(pair):
    zs = np.array([0.5 + 0.8j, -0.7 + 0.4j, 0.5 + 2.0j])
    assert ens.commutation_residual(pair, 150, 170, zs) <= 1e-3


def test_mapped_driving_and_speed(pair):
    i1, i2 = 150, 150
    chain = ens.time_changed_chain(pair, 1, i1, i2)
    A = ens.compute_A(pair, i1, i2)
    assert abs(chain.eta[-1] - A.a1[0]) <= 1e-3
    dt = pair.time(1, 1)
    slope = (chain.v[101] - chain.v[99]) / (2 * dt)
    a1 = ens.compute_A(pair, 100, i2).a1[1]
    assert slope == pytest.approx(a1**2, rel=0.05)


def test_small_gap_marks_record_invalid(pair):
    p = make_pair(n=100)
    p.eps_E = 10.0
    assert not ens.compute_M(p, 50, 50).valid
