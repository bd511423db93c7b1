import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from andersonlab.duc_engine import (
    ALPHA, P_REFERENCE, GradedSet, ScatteredSet, check_graded, duc_count, duc_statistic, fit_exponent,
    graded_sample, is_normal, theta_construct, verify_theta,
)
from andersonlab.fields_operator import LatticeField, bernoulli_potential, cauchy_solution, sharp_example
from andersonlab.lattice_core import Cube


def zero(Q):
    return LatticeField.constant(Q, 0.0)


def test_constants():
    assert P_REFERENCE == pytest.approx(ALPHA / 3 + 13 / 12)
    assert P_REFERENCE < 2


def test_empty_set_is_normal_everywhere():
    E = GradedSet(10.0, 0.1)
    assert E.is_empty() and is_normal(E, Cube((0, 0, 0), 0), 10.0, 0.1)
    assert check_graded(E) == []


def test_unit_ball_in_tiny_cube_not_normal():
    E = GradedSet(10.0, 0.1, E0=((0, 0, 0),))
    assert not is_normal(E, Cube((0, 0, 0), 1), 10.0, 0.1)
    assert is_normal(E, Cube((0, 0, 0), 3), 10.0, 0.1)


@given(st.integers(0, 2 ** 32))
def test_graded_sample_invariants(seed):
    E = graded_sample(Cube((0, 0, 0), 200), 2, [8.0, 64.0], 10.0, 0.1, [3, 2], 4, seed)
    assert check_graded(E) == []
    assert len(E.E0) == 4 and [len(s.balls) for s in E.levels] == [3, 2]
    sites = np.array([(0, 0, 0), (5, 5, 5), E.E0[0]], dtype=np.int64)
    assert list(E.mask(sites)) == [E.contains(tuple(s)) for s in sites]


@given(st.integers(0, 2 ** 32), st.floats(1, 50), st.floats(1, 50), st.integers(0, 6))
def test_normality_monotone_in_cbar(seed, c1, c2, r):
    E = graded_sample(Cube((0, 0, 0), 30), 1, [4.0], 5.0, 0.1, [2], 3, seed % 1000)
    A = Cube((0, 0, 0), r)
    lo, hi = sorted((c1, c2))
    assert not (not is_normal(E, A, lo, 0.1) and is_normal(E, A, hi, 0.1))


def test_graded_sample_rejects_bad_lengths():
    with pytest.raises(ValueError):
        graded_sample(Cube((0, 0, 0), 50), 1, [8.0, 9.0], 1.0, 0.1, [1, 1], 0, 0)
    with pytest.raises(ValueError):
        graded_sample(Cube((0, 0, 0), 50), 1, [8.0], 1.0, 0.1, [1, 1], 0, 0)


def test_check_graded_detects_crowding():
    bad = GradedSet(10.0, 0.1, E0=((0, 0, 0), (1, 0, 0)))
    assert check_graded(bad)
    lvl = ScatteredSet(1, 4.0, 0.1, (((0, 0, 0), 1), ((3, 0, 0), 1)))
    assert check_graded(GradedSet(1.0, 0.1, levels=(lvl,)))


def test_theta_base_case():
    Q = Cube((0, 0, 0), 10)
    V = bernoulli_potential(Q, 1)
    u = cauchy_solution(Q, V, 1)
    th = theta_construct(u, V, Q, 1, 1.0)
    assert th.points == ((0, 0, 0),)
    assert verify_theta(th, u, Q).ok


def test_theta_sharp_example():
    Q = Cube((0, 0, 0), 64)
    u = sharp_example(Cube((0, 0, 0), 65))
    th = theta_construct(u, zero(Q), Q, 4, 0.0)
    assert all(b[0] == b[1] for b in th.points)
    assert len(th.points) > 1
    assert verify_theta(th, u, Q).ok
    assert th == theta_construct(u, zero(Q), Q, 4, 0.0)


def test_theta_errors():
    Q = Cube((0, 0, 0), 10)
    V = bernoulli_potential(Q, 1)
    u = cauchy_solution(Q, V, 1)
    with pytest.raises(ValueError):
        theta_construct(u, V, Q, 0, 1.0)
    with pytest.raises(ValueError):
        theta_construct(u, V, Q, 1, 1.0, N0=3)
    with pytest.raises(ValueError):
        theta_construct(u, V, Q, 1, 0.5)


@given(st.integers(0, 2 ** 32))
def test_theta_cauchy_instances(seed):
    Q = Cube((0, 0, 0), 24)
    V = bernoulli_potential(Q, seed)
    u = cauchy_solution(Q, V, seed)
    th = theta_construct(u, V, Q, 2, 1.0)
    rep = verify_theta(th, u, Q)
    assert rep.ok, rep


def test_verify_theta_catches_bad_sets():
    Q = Cube((0, 0, 0), 30)
    u = sharp_example(Cube((0, 0, 0), 31))
    th = theta_construct(u, zero(Q), Q, 3, 0.0)
    crowded = type(th)(((0, 0, 0), (1, 1, 0)), 3, 30, (0, 0, 0), th.log_floor)
    assert not verify_theta(crowded, u, Q).disjoint_ok
    edge = type(th)(((29, 29, 0),), 3, 30, (0, 0, 0), th.log_floor)
    assert not verify_theta(edge, u, Q).contained_ok


def test_duc_count_examples():
    for n in (2, 5):
        Q = Cube((0, 0, 0), n)
        one = LatticeField.constant(Q, 1.0)
        assert duc_count(one, Q, 1.0).count == (2 * n + 1) ** 3
        assert duc_count(one, Q, 1.0, "cubic").count == (2 * n + 1) ** 3
    with pytest.raises(ValueError):
        duc_count(one, Q, 1.0, "quartic")


def test_duc_sharp_counts():
    # sites with |u| ≥ e^{-n}: the diagonal with s·z ≥ -n
    s = math.log(3 + 2 * math.sqrt(2))
    for n in (8, 16):
        Q = Cube((0, 0, 0), n)
        u = sharp_example(Cube((0, 0, 0), n + 1))
        zmin = math.ceil(-n / s)
        expect = (2 * n + 1) * (n - zmin + 1)
        assert duc_count(u, Q, 1.0, V=zero(Q)).count == expect


def test_duc_statistic_exponent():
    fields = []
    for n in (8, 16, 32):
        fields.append((sharp_example(Cube((0, 0, 0), n + 1)), Cube((0, 0, 0), n)))
    st_ = duc_statistic(fields, 1.0)
    assert [c.n for c in st_.counts] == [8, 16, 32]
    assert 1.9 < st_.exponent < 2.05
    assert fit_exponent([1, 2, 4], [1, 4, 16]) == pytest.approx(2.0)


def test_duc_count_excludes_graded_set():
    Q = Cube((0, 0, 0), 3)
    one = LatticeField.constant(Q, 1.0)
    E = GradedSet(1.0, 0.1, E0=((0, 0, 0),))
    assert duc_count(one, Q, 1.0, E=E).count == 7 ** 3 - 1
