from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from andersonlab.fields_operator import LatticeField, sharp_example
from andersonlab.lattice_core import Cube
from andersonlab.pyramid_geom import (
    BOUNDARY, INTERIOR, OUTSIDE, BasementError, TetraFrame, _box, bilipschitz_ratios,
    boundary_count_statistic, boundary_sites, classify_array, f_value, find_basements, gamma_free_inside,
    pyramid_build, pyramid_membership, truncated_membership, truncated_vertices,
)

import oracles


def test_frame_basics():
    fr = TetraFrame((0, 0, 0), 2)
    assert fr.apex == (2, 2, 4)
    assert f_value(fr, fr.a) == 0
    assert f_value(fr, fr.apex) == 0
    for r in (1, 2, 5):
        assert f_value(TetraFrame((0, 0, 0), r), (0, 0, 1)) == 1
    with pytest.raises(ValueError):
        f_value(fr, (10, 10, 10))
    with pytest.raises(ValueError):
        TetraFrame((0, 0, 0), -1)


def test_truncated_vertices():
    fr = TetraFrame((1, -1, 0), 3)
    assert sorted(truncated_vertices(fr, fr.a).values()) == sorted(fr.basement_vertices())
    for b in fr.lattice_points():
        vs = truncated_vertices(fr, b)
        assert all(isinstance(x, int) for v in vs.values() for x in v)
        assert truncated_membership(fr, b, b)


def test_lattice_points_match_oracle():
    for r in range(4):
        fr = TetraFrame((0, 0, 0), r)
        lo, hi = fr.bounding_box(1)
        brute = [tuple(int(v) for v in x) for x in _box(lo, hi) if oracles.in_closed_tetra(fr.a, r, x)]
        assert sorted(fr.lattice_points()) == sorted(brute)


def test_pyramid_examples():
    fr = TetraFrame((0, 0, 0), 3)
    P = pyramid_build(fr, [fr.a])
    assert P.levels == ((0, 0),)
    P0 = pyramid_build(TetraFrame((4, 4, 4), 0), [(4, 4, 4)])
    assert boundary_sites(P0) == [(4, 4, 4)]
    lo, hi = fr.bounding_box(1)
    X = _box(lo, hi)
    # (1, 1, 2) sits on the λ̄₄ face, so it carves nothing and the pyramid keeps one level
    P1 = pyramid_build(fr, [(0, 0, 0), (1, 1, 2)])
    assert P1.levels == ((0, 0),)
    assert (classify_array(P1, X) == oracles.classify(fr.a, 3, [(0, 0, 0), (1, 1, 2)], X)).all()
    # an interior point does add a level
    P2 = pyramid_build(fr, [(0, 0, 0), (1, 0, 2)])
    assert P2.levels == ((0, 0), (3, 1))
    assert (classify_array(P2, X) == oracles.classify(fr.a, 3, [(0, 0, 0), (1, 0, 2)], X)).all()
    assert (classify_array(P2, X) != classify_array(P, X)).any()
    assert pyramid_membership(P, fr.apex) == BOUNDARY
    assert pyramid_membership(P, fr.a) == BOUNDARY
    assert pyramid_membership(P, (Fraction(1, 2), Fraction(1, 2), Fraction(1))) in (INTERIOR, BOUNDARY)
    assert pyramid_membership(P, (50, 0, 0)) == OUTSIDE


def test_pyramid_build_errors():
    fr = TetraFrame((0, 0, 0), 3)
    with pytest.raises(ValueError):
        pyramid_build(fr, [(1, 1, 2)])
    inside_basement = next(b for b in fr.lattice_points() if oracles.open_basement(fr.a, 3, b))
    with pytest.raises(ValueError):
        pyramid_build(fr, [fr.a, inside_basement])


def _gammas(r):
    fr = TetraFrame((0, 0, 0), r)
    pts = [p for p in fr.lattice_points() if p != fr.a and not oracles.open_basement(fr.a, r, p)]
    return fr, pts


@settings(max_examples=30)
@given(st.integers(1, 3), st.data())
def test_membership_matches_oracle(r, data):
    fr, pts = _gammas(r)
    extra = data.draw(st.lists(st.sampled_from(pts), max_size=3, unique=True))
    gamma = [fr.a] + extra
    P = pyramid_build(fr, gamma)
    lo, hi = fr.bounding_box(1)
    X = _box(lo, hi)
    lab = classify_array(P, X)
    assert (lab == oracles.classify(fr.a, r, gamma, X)).all()
    assert gamma_free_inside(P, gamma)
    # heights strictly increase through the levels
    assert all(x[0] < y[0] for x, y in zip(P.levels, P.levels[1:]))


@given(st.tuples(*[st.integers(-5, 5)] * 3), st.integers(1, 3))
def test_translation_covariance(a, r):
    fr0, fr = TetraFrame((0, 0, 0), r), TetraFrame(a, r)
    lo, hi = fr0.bounding_box(1)
    X = _box(lo, hi)
    l0 = classify_array(pyramid_build(fr0, [fr0.a]), X)
    l1 = classify_array(pyramid_build(fr, [fr.a]), X + np.asarray(a))
    assert (l0 == l1).all()


def test_bilipschitz_small_frames():
    for r in range(1, 5):
        fr, pts = _gammas(r)
        lo_r, hi_r = bilipschitz_ratios(pyramid_build(fr, [fr.a]))
        assert lo_r >= 0.1 and hi_r <= 1 + 1e-12


def test_boundary_count_examples():
    fr = TetraFrame((0, 0, 0), 0)
    u = LatticeField.constant(Cube((0, 0, 0), 40), 1.0)
    bc = boundary_count_statistic(u, pyramid_build(fr, [fr.a]), -1.0, 0.0, 32)
    assert bc.count == 1 and bc.count >= bc.bound
    # sharp example with Γ = support: count matches a direct scan
    u = sharp_example(Cube((0, 0, 0), 12))
    fr = TetraFrame((0, 0, 0), 2)
    supp = [p for p in fr.lattice_points() if p[0] == p[1]]
    gamma = [p for p in supp if not oracles.open_basement(fr.a, 2, p)]
    P = pyramid_build(fr, gamma)
    bc = boundary_count_statistic(u, P, -5.0, 0.0, 10)
    scan = sum(1 for b in boundary_sites(P) if abs(u[b]) >= np.exp(-5.0))
    assert bc.count == scan


def test_basements_single_triangle():
    n = 40
    D = Cube((0, 0, 0), n)
    u = LatticeField.from_function(D, lambda x, y, z: np.where((x == 0) & (y == 0) & (z == 0), 1.0, np.exp(-10.0)))
    res = find_basements(u, n, 0, (0, 0, 0), [-3.0], 0.01)
    assert len(res.basements) == 1
    b = res.basements[0]
    assert b.a == (0, 0, 0) and b.r == res.radii[(0, 0, 0)] >= n / 100 and b.s == 1
    assert res.conclusion1 and res.overlap_ok and res.normal_ok


def test_basements_errors():
    n = 16
    u = LatticeField.constant(Cube((0, 0, 0), n), 1.0)
    with pytest.raises(BasementError):
        find_basements(u, n, 1, (0, 0, 0), [-3.0], 0.01)
    with pytest.raises(BasementError):
        find_basements(u, n, 0, (0, 0, 0), [-3.0, -2.9], 1.0)
    with pytest.raises(BasementError):
        find_basements(u, n, 0, (0, 0, 0), [1.0], 0.01)
