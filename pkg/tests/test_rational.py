import numpy as np
import pytest

from thermoscope.rational import (InvalidMapError, PreimageSet, RationalMap, RootFindingError,
                                  TriState, assumption_a_report, critical_points, evaluate,
                                  exceptional_points, preimages, spherical_derivative)
from thermoscope.sphere import (SpherePoint, chordal_dist, from_affine, make_grid,
                                point_at_infinity)


def _affine_set(items):
    return sorted((round(p.z0.real / p.z1.real if abs(p.z1) > 1e-12 else np.inf, 9), m)
                  for p, m in items)


def test_evaluate_examples(square):
    assert evaluate(square, from_affine(0)).isclose(from_affine(0))
    assert evaluate(square, point_at_infinity()).isclose(point_at_infinity())
    g = RationalMap([-1, 0, 1], [0, 1])
    assert evaluate(g, from_affine(1)).isclose(from_affine(0))


def test_preimages_of_one(square):
    pre = preimages(square, from_affine(1))
    assert isinstance(pre, PreimageSet)
    assert _affine_set(pre) == [(-1.0, 1), (1.0, 1)]


def test_critical_value_multiplicity(square):
    pre = preimages(square, from_affine(0))
    assert len(pre.items) == 1 and pre.items[0][1] == 2
    assert pre.items[0][0].isclose(from_affine(0), 1e-7)


def test_preimage_at_infinity(square):
    pre = preimages(square, point_at_infinity())
    assert len(pre.items) == 1 and pre.items[0][1] == 2
    assert pre.items[0][0].at_infinity


def test_degree_one_rejected():
    with pytest.raises(InvalidMapError):
        RationalMap.polynomial([1, 1])


def test_common_root_rejected():
    with pytest.raises(InvalidMapError):
        RationalMap([-1, 0, 1], [-1, 1])


def test_map_serialization(lattes_like):
    data = lattes_like.to_dict()
    g = RationalMap.from_dict(data)
    Z = make_grid("uniform_sphere", 50, 0).coords
    assert np.allclose(np.abs(g(Z)[:, 0] * lattes_like(Z)[:, 1] - g(Z)[:, 1] * lattes_like(Z)[:, 0]),
                       0, atol=1e-14)
    with pytest.raises(InvalidMapError):
        RationalMap.from_dict({**data, "extra": 1})


def test_spherical_derivative_examples(square):
    for theta in np.linspace(0, 2 * np.pi, 7):
        assert spherical_derivative(square, from_affine(np.exp(1j * theta))) == pytest.approx(2, abs=1e-14)
    assert spherical_derivative(square, from_affine(0)) == 0


def test_spherical_derivative_matches_affine_formula(lattes_like, rng):
    f = lattes_like
    for z in rng.standard_normal(20) * 3 + 1j * rng.standard_normal(20):
        h = 1e-6
        fz = complex(np.polyval(f.P[::-1], z) / np.polyval(f.Q[::-1], z))
        fzh = complex(np.polyval(f.P[::-1], z + h) / np.polyval(f.Q[::-1], z + h))
        deriv = abs((fzh - fz) / h) * (1 + abs(z) ** 2) / (1 + abs(fz) ** 2)
        assert spherical_derivative(f, from_affine(z)) == pytest.approx(deriv, rel=1e-5)


def test_spherical_derivative_at_infinity_is_chart_independent():
    f = RationalMap([1, 0, 2], [0, 3, 1])
    near = spherical_derivative(f, from_affine(1e7))
    at = spherical_derivative(f, point_at_infinity())
    assert near == pytest.approx(at, rel=1e-6)


def test_critical_points_of_square(square, basilica):
    for f in (square, basilica):
        crit = critical_points(f)
        assert sum(m for _, m in crit) == 2
        assert any(p.isclose(from_affine(0), 1e-9) for p, _ in crit)
        assert any(p.at_infinity for p, _ in crit)


def test_generic_cubic_has_four_critical_points():
    f = RationalMap([0.3, 1, 0.2j, 1], [1, 0.5])
    assert sum(m for _, m in critical_points(f)) == 4


def _as_set(points):
    return sorted((round(abs(p.z1), 9), round(abs(p.z0), 9)) for p in points)


def test_exceptional_points(square, basilica, lattes_like):
    assert _as_set(exceptional_points(square)) == _as_set([from_affine(0), point_at_infinity()])
    assert _as_set(exceptional_points(basilica)) == _as_set([point_at_infinity()])
    assert exceptional_points(lattes_like) == []


def test_exceptional_two_cycle():
    inv = RationalMap([1], [0, 0, 1])  # 1/z^2 swaps 0 and infinity
    assert len(exceptional_points(inv)) == 2


def test_exceptional_oracle_by_fixed_point_scan(basilica):
    # independent check: among fixed points of f and f^2, test f^{-1}(a) = {a} directly
    from thermoscope.rational import _roots_of
    f2 = basilica.compose(basilica)
    found = []
    for row in _roots_of(f2.fixed_point_form()):
        a = SpherePoint.from_array(row)
        pre = preimages(basilica, evaluate(basilica, a))
        pre2 = preimages(basilica, a)
        if len(pre.items) == 1 and len(pre2.items) == 1:
            found.append(a)
    assert len(found) == 1 and found[0].at_infinity


def test_assumption_a_reports(square, basilica, lattes_like):
    r = assumption_a_report(square)
    assert r.satisfies_A is TriState.FALSE and r.exceptional_disjoint_from_julia
    r = assumption_a_report(basilica)
    assert r.satisfies_A is TriState.FALSE and r.exceptional_disjoint_from_julia
    r = assumption_a_report(lattes_like)
    assert r.satisfies_A is TriState.LIKELY and r.exceptional == []
    assert "satisfies_A" in r.to_dict()


def test_root_failure_raises(monkeypatch, square):
    import thermoscope.rational as R
    monkeypatch.setattr(R, "RESIDUAL_TOL", -1.0)
    with pytest.raises(RootFindingError) as info:
        preimages(square, from_affine(0.3))
    assert info.value.residuals is not None


def test_compose_matches_iteration(basilica):
    f2 = basilica.compose(basilica)
    Z = make_grid("uniform_sphere", 100, 2).coords
    d = chordal_dist
    for a, b in zip(f2(Z), basilica.iterate(Z, 2)):
        assert d(SpherePoint.from_array(a), SpherePoint.from_array(b)) < 1e-12
