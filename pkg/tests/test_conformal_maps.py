import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from sle_lab.conformal_maps import (
    IDENTITY, MapComposition, SlitStep, apply_slit, compose_apply, compose_jet,
    compose_jet_many, hcap, invert_apply, slit_jet,
)
from sle_lab.errors import DomainError, ParameterError
from sle_lab.loewner import DrivingPath, evolve, extract_driving, trace
from sle_lab.sde_drivers import RngSpec, standard_sle_driver


def sle_comp(n=200, kappa=3.0, dt=1e-3, seed=1):
    return evolve(standard_sle_driver(kappa, dt, n, RngSpec(seed)))


def test_closed_forms():
    s = SlitStep(0.0, 1.0)
    assert abs(apply_slit(s, 3j) - 1j * np.sqrt(5)) < 1e-12
    assert abs(apply_slit(s, 2j)) < 1e-12
    assert abs(apply_slit(s, 2.0) - np.sqrt(8)) < 1e-12
    assert abs(apply_slit(s, -2.0) + np.sqrt(8)) < 1e-12


def test_slit_step_validation():
    with pytest.raises(ParameterError):
        SlitStep(0.0, 0.0)
    with pytest.raises(ParameterError):
        SlitStep(np.inf, 1.0)


def test_point_on_slit_is_rejected():
    with pytest.raises(DomainError):
        apply_slit(SlitStep(0.0, 1.0), 1j)


def test_slit_jet_at_two():
    f, f1, f2, f3 = slit_jet(SlitStep(0.0, 1.0), 2.0)
    r8 = np.sqrt(8.0)
    assert (f, f1, f2, f3) == pytest.approx((r8, 2 / r8, 4 / r8**3, -24 / r8**5), rel=1e-14)
    assert (f, f1, f2, f3) == pytest.approx((2.8284271, 0.7071068, 0.1767767, -0.1325825),
                                            abs=1e-7)


def test_slit_jet_identity_limit():
    f, f1, f2, f3 = slit_jet(SlitStep(0.0, 1e-12), 1.5)
    assert f1 == pytest.approx(1.0, abs=1e-11)
    assert abs(f2) < 1e-11


@settings(max_examples=60, deadline=None)
@given(xi=st.floats(-3, 3), dt=st.floats(1e-3, 2.0), off=st.floats(0.1, 5.0),
       side=st.sampled_from([-1.0, 1.0]))
def test_slit_jet_matches_finite_differences(xi, dt, off, side):
    x = xi + side * off
    step = SlitStep(xi, dt)
    h = 1e-5 * off
    jet = slit_jet(step, x)
    lo, hi = slit_jet(step, x - h), slit_jet(step, x + h)
    fd1 = (apply_slit(step, x + h) - apply_slit(step, x - h)).real / (2 * h)
    assert fd1 == pytest.approx(jet.f1, rel=1e-6, abs=1e-9)
    assert (hi.f1 - lo.f1) / (2 * h) == pytest.approx(jet.f2, rel=1e-6, abs=1e-9)
    assert (hi.f2 - lo.f2) / (2 * h) == pytest.approx(jet.f3, rel=1e-6, abs=1e-9)


def test_empty_composition_is_identity():
    assert compose_apply(IDENTITY, 1 + 2j) == 1 + 2j
    assert tuple(compose_jet(IDENTITY, 0.3)) == (0.3, 1.0, 0.0, 0.0)
    assert hcap(IDENTITY) == 0.0


def test_two_steps_equal_one_longer_step():
    two = MapComposition([0.0, 0.0], [1.0, 1.0])
    assert abs(compose_apply(two, 4j) - 1j * np.sqrt(8)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(xi=st.floats(-2, 2), dt=st.floats(0.01, 3.0), k=st.integers(2, 12),
       z=st.complex_numbers(max_magnitude=10).filter(lambda z: z.imag > 0.05))
def test_constant_driving_semigroup(xi, dt, k, z):
    assume(abs(z.real - xi) > 0.05 or z.imag > 2 * np.sqrt(dt) + 0.05)
    one = compose_apply(MapComposition([xi], [dt]), z)
    many = compose_apply(MapComposition([xi] * k, [dt / k] * k), z)
    assert abs(one - many) <= 1e-12 * max(1.0, abs(one))


def test_composition_jet_matches_finite_differences():
    comp = sle_comp()
    x, h = 5.0, 1e-5
    jet = compose_jet(comp, x)
    fd1 = (compose_apply(comp, x + h) - compose_apply(comp, x - h)).real / (2 * h)
    lo, hi = compose_jet(comp, x - h), compose_jet(comp, x + h)
    assert fd1 == pytest.approx(jet.f1, rel=1e-6)
    assert (hi.f1 - lo.f1) / (2 * h) == pytest.approx(jet.f2, rel=1e-6)
    assert (hi.f2 - lo.f2) / (2 * h) == pytest.approx(jet.f3, rel=1e-6)


def test_complex_jet_agrees_with_real_jet_on_the_line():
    comp = sle_comp(50)
    real = compose_jet(comp, -2.5)
    cplx = compose_jet(comp, -2.5 + 1e-300j)
    assert np.allclose(np.array(cplx).real, np.array(real), rtol=1e-12)


def test_jet_many_matches_scalar():
    comp = sle_comp(50)
    xs = np.array([-3.0, -1.5, 2.0, 4.0])
    rows = compose_jet_many(comp, xs)
    for x, row in zip(xs, rows):
        assert np.allclose(row, compose_jet(comp, x), rtol=1e-14)


def test_inverse_of_single_step():
    s = MapComposition([0.0], [1.0])
    assert abs(invert_apply(s, 0.0) - 2j) < 1e-12
    assert abs(invert_apply(s, compose_apply(s, 3j)) - 3j) < 1e-10


def test_inverse_roundtrip_long_composition():
    comp = sle_comp(200)
    rng = np.random.default_rng(5)
    w = rng.uniform(-3, 3, 20) + 1j * rng.uniform(0.1, 3, 20)
    assert np.max(np.abs(compose_apply(comp, invert_apply(comp, w)) - w)) <= 1e-8


def test_hcap_values():
    a = MapComposition([0.0], [1.0])
    assert hcap(a) == 2.0
    b = sle_comp(30)
    assert hcap(a.then(b)) == pytest.approx(hcap(a) + hcap(b), rel=1e-15)


def test_composition_is_immutable():
    comp = sle_comp(5)
    with pytest.raises(AttributeError):
        comp.xis = np.zeros(5)
    with pytest.raises(ValueError):
        comp.xis[0] = 1.0
    assert len(comp.prefix(3)) == 3 and len(comp.append(SlitStep(0.0, 0.1))) == 6


def test_capacity_scaling_for_small_slit():
    comp = sle_comp(200)
    x0, h = 3.0, 1e-3
    slit = x0 + 1j * np.linspace(0.0, h, 400)
    image = compose_apply(comp, slit)
    image[0] = image[0].real
    _, zipped = extract_driving(image)
    w1 = compose_jet(comp, x0).f1
    cap = h * h / 2
    assert abs(hcap(zipped) - w1**2 * cap) / cap <= 0.05


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000), a=st.floats(0.05, 3.0), b=st.floats(0.05, 3.0))
def test_derivative_decreases_toward_hull_from_the_left(seed, a, b):
    path = standard_sle_driver(2.0, 1e-3, 100, RngSpec(seed))
    comp = evolve(path)
    left = trace(path).points.real.min()
    y2 = left - min(a, b)
    y1 = y2 - max(a, b)
    assert compose_jet(comp, y1).f1 > compose_jet(comp, y2).f1


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), xs=st.lists(st.floats(1.0, 6.0), min_size=2, max_size=6))
def test_real_points_stay_real_and_ordered(seed, xs):
    path = standard_sle_driver(2.0, 1e-3, 100, RngSpec(seed))
    comp = evolve(path)
    tr = trace(path).points
    lo, hi = tr.real.min(), tr.real.max()
    pts = np.array(sorted({hi + x for x in xs} | {lo - x for x in xs}))
    img = compose_apply(comp, pts.astype(complex))
    assert np.all(img.imag == 0)
    assert np.all(np.diff(img.real) > 0)


def test_upper_half_plane_is_preserved():
    comp = sle_comp(100)
    rng = np.random.default_rng(3)
    z = rng.uniform(-4, 4, 200) + 1j * rng.uniform(1.5, 4, 200)
    assert np.all(compose_apply(comp, z).imag > 0)


def test_driving_path_validation():
    with pytest.raises(ParameterError):
        DrivingPath([0.0, 0.0], [0.0, 1.0])
    with pytest.raises(ParameterError):
        DrivingPath([0.1, 0.2], [0.0, 1.0])
