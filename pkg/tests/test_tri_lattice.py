import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from andersonlab.tri_lattice import (
    RevTrapezoid, Trapezoid, Triangle, check_decomposition, construct_v, discrete_remez,
    duc_triangle_statistic, finite_difference, interior_triples, interpolate_exact, poly_eval,
    polynomial_structure_holds, propagate, propagate_triangle, remez_bound, reversed_reduction,
    three_sum, trapezoid_statistic, triangle_growth_bound, verify_growth,
)


def test_region_sizes():
    for n in range(5):
        assert len(Triangle((0, 0), n).sites()) == Triangle((0, 0), n).size()
    for m, ell in [(0, 0), (3, 1), (7, 4)]:
        P = Trapezoid((2, -1), m, ell)
        assert len(P.sites()) == P.size()
        assert all(p in P for p in P.sites())
    R = RevTrapezoid((0, 0), 5, 2)
    assert all(p in R for p in R.sites())


def test_propagate_zero_and_examples():
    tri = Triangle((0, 0), 2)
    u = propagate_triangle(tri, [0] * len(tri.xi_edge()))
    assert set(u.values()) == {0}
    t1 = Triangle((0, 0), 1)
    u = propagate_triangle(t1, [1] * 4)
    assert max(abs(x) for x in u.values()) <= 8
    assert triangle_growth_bound(1, 0, 1) == 8
    assert triangle_growth_bound(5, 3, 0) == 5
    assert triangle_growth_bound(1, 1, 2) == 127


def test_propagate_errors():
    with pytest.raises(ValueError):
        propagate({}, 0, 1)
    with pytest.raises(ValueError):
        propagate({0: 1, 2: 1}, 0, 1)
    with pytest.raises(ValueError):
        propagate({0: 1, 1: 1}, 0, 2)
    with pytest.raises(ValueError):
        triangle_growth_bound(-1, 0, 1)


@given(st.integers(0, 4), st.data())
def test_growth_bound_holds(m, data):
    tri = Triangle((0, 0), m)
    edge = data.draw(st.lists(st.integers(-5, 5), min_size=3 * m + 1, max_size=3 * m + 1))
    res = {p: data.draw(st.integers(-3, 3)) for p in tri.sites()}
    u = propagate_triangle(tri, edge, res)
    assert all(three_sum(u, b) == res[b] for b in interior_triples(tri))
    obs, bound = verify_growth(tri, u, res)
    assert obs <= bound


def test_growth_bound_tight_within_factor_four():
    # exhaustive signs: the worst ±1 edge comes within a factor 4 of 2^{3m}
    for m in range(1, 4):
        tri = Triangle((0, 0), m)
        best = max(max(abs(x) for x in propagate_triangle(tri, list(sg)).values())
                   for sg in itertools.product((1, -1), repeat=3 * m + 1))
        assert 2 ** (3 * m) / 4 <= best <= 2 ** (3 * m)


def test_construct_v_trivial_cases():
    P = Trapezoid((0, 0), 5, 3)
    pts = set(P.sites()) | {(s - 1, t) for s, t in P.sites()} | {(s, t + 1) for s, t in P.sites()}
    zero = {p: 0 for p in pts}
    d = construct_v(zero, P)
    assert set(d.v.values()) == {0} and set(d.w.values()) == {0}
    # an exact solution with vanishing left leg is reproduced by v
    row = {s: random.Random(1).randint(-4, 4) for s in range(-P.m - P.ell - 2, 1)}
    u = dict(zero)
    for s in range(-P.m, 1):
        u[(s, 0)] = row[s]
    # fill downwards with zero three-term sums and zero left leg
    for t in range(-1, -P.ell - 1, -1):
        u[(0, t)] = 0
        for s in range(0, -P.m + t, -1):
            u[(s - 1, t)] = -u[(s, t)] - u[(s, t + 1)]
    d = construct_v(u, P)
    assert all(d.w[p] == 0 for p in d.w)


@given(st.integers(1, 30), st.integers(0, 5), st.integers(0, 2 ** 32))
def test_decomposition_properties(m, ell, seed):
    ell = min(ell, m)
    rng = random.Random(seed)
    P = Trapezoid((0, 0), m, ell)
    pts = set(P.sites()) | {(s - 1, t) for s, t in P.sites()} | {(s, t + 1) for s, t in P.sites()}
    u = {p: rng.randint(-5, 5) for p in pts}
    d = construct_v(u, P)
    rep = check_decomposition(u, d)
    assert rep.left_leg_zero and rep.upper_edge_match and rep.sums_match and rep.bound_ok
    assert rep.w_homogeneous
    assert polynomial_structure_holds(d)


def test_finite_difference():
    assert finite_difference([1, 4, 9, 16, 25], 2) == [2, 2, 2]
    assert finite_difference([1, 4, 9, 16, 25], 3) == [0, 0]


def test_remez_examples():
    assert remez_bound(Fraction(3), 0, 2, 10) == 3
    chk = discrete_remez({x: 7 for x in range(4)}, 0, 4, (0, 20))
    assert chk.ok and chk.sup == 7
    # p(x) = x on [0, 10], sampled on the six points nearest 0
    chk = discrete_remez({x: x for x in range(-5, 1)}, 1, 5, (-5, 5))
    assert chk.sup == 5 and chk.ok
    chk = discrete_remez({x: x for x in range(6)}, 1, 5, (0, 10))
    assert chk.bound == Fraction(40, 5) * 5 and chk.sup <= chk.bound
    with pytest.raises(ValueError):
        discrete_remez({0: 1}, 1, 1, (0, 3))
    with pytest.raises(ValueError):
        discrete_remez({0: 0, 1: 1, 2: 4}, 1, 2, (0, 3))


@given(st.lists(st.integers(-3, 3), min_size=1, max_size=6), st.integers(1, 6), st.integers(-10, 0),
       st.integers(6, 30))
def test_remez_random(coef, ell, lo, length):
    d = len(coef) - 1
    hi = lo + length
    pts = list(range(lo, hi + 1))
    if len(pts) < d + ell:
        return
    vals = {x: poly_eval(coef, x) for x in pts}
    chosen = sorted(pts, key=lambda x: (abs(vals[x]), x))[:d + ell]
    chk = discrete_remez({x: vals[x] for x in chosen}, d, ell, (lo, hi))
    assert chk.ok


def test_interpolation_exact():
    coef = interpolate_exact([0, 1, 2], [1, 2, 5])
    assert coef == [1, 0, 1]


def test_triangle_statistic_examples():
    ones = {p: 1 for p in Triangle((0, 0), 8).sites()}
    assert duc_triangle_statistic(ones, 4).verdict == "vacuous"
    tri = Triangle((0, 0), 30)
    rng = random.Random(4)
    u = propagate_triangle(tri, [rng.choice((1, -1)) for _ in tri.xi_edge()])
    st_ = duc_triangle_statistic(u, 30, C4=6.0, origin=(0, 0))
    assert st_.hypothesis_holds and st_.count > st_.threshold


def test_trapezoid_statistic_examples():
    P = Trapezoid((0, 0), 4, 0)
    u = {p: 1 for p in set(P.sites()) | {(s - 1, t) for s, t in P.sites()} | {(s, 1) for s, _ in P.sites()}}
    stat = trapezoid_statistic(u, P, [(0, 0)], C4=6.0)
    assert stat.count >= 1
    P = Trapezoid((0, 0), 40, 4)
    rng = random.Random(9)
    row = {s: rng.choice((1, -1)) for s in range(-P.m - P.ell - 1, 1)}
    u = propagate(row, -P.ell, P.ell + 1)
    # u solves the recurrence upward; use it as data on the trapezoid
    pts = set(P.sites()) | {(s - 1, t) for s, t in P.sites()} | {(s, t + 1) for s, t in P.sites()}
    assert all(p in u for p in pts)
    stat = trapezoid_statistic(u, P, [(-20, 0)], C4=6.0)
    assert stat.hypothesis_holds and "square" in stat.bounds
    with pytest.raises(ValueError):
        trapezoid_statistic(u, P, [], C4=6.0)


def test_reversed_reduction_inside():
    R = RevTrapezoid((0, 0), 30, 10)
    T = reversed_reduction(R, [(-15, 0)])
    assert set(T.sites()) <= set(R.sites())
