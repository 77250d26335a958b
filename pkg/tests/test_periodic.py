import numpy as np
import pytest

from thermoscope.measures import Mode, default_dictionary, julia_sample
from thermoscope.periodic import (DegreeCapExceeded, PeriodicPoint, lyapunov_from_periodic,
                                  multiplier_modulus, periodic_csv, periodic_measure,
                                  periodic_points, select_repelling_near_julia)
from thermoscope.rational import RationalMap
from thermoscope.sphere import chordal, from_affine, to_affine_array
from thermoscope.weights import Weight

ZERO = Weight.constant(0.0)


def affine(points):
    return to_affine_array(np.vstack([p.point.as_array() for p in points]))


def test_period_one(square):
    pts = periodic_points(square, 1)
    values, inf = affine(pts)
    assert len(pts) == 3 and pts.dropped == 0
    assert abs(values[0]) < 1e-15 and pts[0].multiplier_modulus == 0 and not pts[0].repelling
    assert abs(values[1] - 1) < 1e-14 and pts[1].multiplier_modulus == pytest.approx(2) and pts[1].repelling
    assert inf[2] and not pts[2].repelling


def test_period_two(square):
    pts = periodic_points(square, 2)
    rep = [p for p in pts if p.repelling]
    values, _ = affine(rep)
    assert np.allclose(np.sort_complex(values ** 3), [1, 1, 1], atol=1e-12)
    assert all(p.multiplier_modulus == pytest.approx(4) for p in rep)


@pytest.mark.parametrize("n", [3, 5, 8])
def test_circle_count(square, n):
    pts = periodic_points(square, n)
    rep = [p for p in pts if p.repelling]
    assert len(pts) == 2 ** n + 1 and len(rep) == 2 ** n - 1
    values, _ = affine(rep)
    assert np.allclose(values ** (2 ** n - 1), 1, atol=1e-10)
    assert np.allclose([p.multiplier_modulus for p in rep], 2 ** n)


def test_points_close_their_orbits(lattes_like):
    f = lattes_like
    pts = periodic_points(f, 4)
    Z = np.vstack([p.point.as_array() for p in pts])
    assert len(pts) + pts.dropped == 17
    assert np.max(chordal(f.iterate(Z, 4), Z)) < 1e-7


def test_divisor_periods_reappear(basilica):
    p2 = periodic_points(basilica, 2)
    p4 = periodic_points(basilica, 4)
    Z4 = np.vstack([p.point.as_array() for p in p4])
    for p in p2:
        assert np.min(chordal(Z4, p.point.as_array())) < 1e-9


def test_multiplier_by_direct_differentiation(basilica):
    f3 = basilica.compose(basilica).compose(basilica)
    for p in periodic_points(basilica, 3):
        direct = f3.spherical_derivative_array(p.point.as_array())[0]
        assert p.multiplier_modulus == pytest.approx(direct, rel=1e-6, abs=1e-12)


def test_multiplier_helper(square):
    Z = from_affine(np.exp(0.3j)).as_array()
    assert multiplier_modulus(square, Z, 5)[0] == pytest.approx(32)


def test_sorted_by_angle(square):
    pts = periodic_points(square, 4)
    values, inf = affine(pts)
    angles = np.mod(np.angle(values[~inf & (np.abs(values) > 0)]), 2 * np.pi)
    assert np.all(np.diff(angles) >= -1e-12)


def test_degree_cap(square):
    with pytest.raises(DegreeCapExceeded):
        periodic_points(square, 13)
    with pytest.raises(DegreeCapExceeded):
        periodic_points(RationalMap.polynomial([0, 0, 0, 1]), 5, degree_cap=200)


def test_birkhoff_weights(square):
    w = Weight.angular(0.2)
    pts = periodic_points(square, 3, w=w)
    for p in pts:
        if p.repelling:
            z = to_affine_array(p.point.as_array())[0][0]
            s = sum(0.2 * np.cos(np.angle(z ** (2 ** j))) for j in range(3))
            assert p.birkhoff_weight == pytest.approx(np.exp(s), rel=1e-10)


@pytest.fixture(scope="module")
def circle_julia(square):
    return julia_sample(square, 24, 2048, 0)


def test_selection(square, circle_julia):
    pts = periodic_points(square, 6)
    sel = select_repelling_near_julia(pts, circle_julia)
    assert len(sel) == 63
    assert len(select_repelling_near_julia(pts, circle_julia, delta=np.inf)) == 63
    assert select_repelling_near_julia([], circle_julia) == []


def test_selection_drops_far_points(circle_julia):
    far = PeriodicPoint(from_affine(5.0), 1, 3.0, True)
    near = PeriodicPoint(from_affine(np.exp(0.1j)), 1, 3.0, True)
    assert select_repelling_near_julia([far, near], circle_julia) == [near]


def test_zero_weight_periodic_measure(square, circle_julia):
    for n in (4, 7):
        sel = select_repelling_near_julia(periodic_points(square, n), circle_julia)
        mu = periodic_measure(square, ZERO, 2.0, sel, n)
        assert mu.total_mass == pytest.approx((2 ** n - 1) / 2 ** n, abs=1e-12)
        norm = mu.normalized_copy()
        for m in range(1, 2 ** n - 1):
            z = np.sum(norm.masses * to_affine_array(norm.coords)[0] ** m)
            assert abs(z) < 1e-9
        assert lyapunov_from_periodic(square, ZERO, 2.0, sel, n) == pytest.approx(
            (2 ** n - 1) / 2 ** n * np.log(2), abs=1e-12)


def test_empty_selection(square):
    mu = periodic_measure(square, ZERO, 2.0, [], 3)
    assert len(mu) == 0 and mu.total_mass == 0
    assert lyapunov_from_periodic(square, ZERO, 2.0, [], 3) == 0


def test_csv(square):
    text = periodic_csv(periodic_points(square, 2))
    lines = text.splitlines()
    assert lines[0] == "re,im,at_infinity,period,multiplier_modulus,repelling,birkhoff_weight"
    assert len(lines) == 6 and lines[-1].split(",")[2] == "1"


def test_seeds_agree(basilica):
    a = periodic_points(basilica, 5, seed=0)
    b = periodic_points(basilica, 5, seed=9)
    Za = np.vstack([p.point.as_array() for p in a])
    Zb = np.vstack([p.point.as_array() for p in b])
    assert len(a) == len(b) == 33
    assert np.max(chordal(Za, Zb)) < 1e-12
