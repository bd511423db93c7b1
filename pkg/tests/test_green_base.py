import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from andersonlab.fields_operator import LatticeField, assemble, eig_extremal, periodic_impurities
from andersonlab.green_base import (
    GreenTable, base_case_probe, base_case_trial, cutoff, fit_far_constant, fundamental_domain,
    grid_potential, green_bessel, green_function, green_table, green_values, impurity_density_ok,
    laplacian_array, lifshitz_test_function, lifshitz_u, min_max_check, neg_laplacian_G,
    principal_eigenvalue_bounds,
)
from andersonlab.lattice_core import Cube

import oracles

WATSON = math.sqrt(6) / (32 * math.pi ** 3) * math.prod(math.gamma(k / 24) for k in (1, 5, 7, 11))

# values of the standalone Bessel-integral oracle, frozen
FROZEN = {
    (0, 0, 0): 0.25273100985866304,
    (1, 0, 0): 0.08606434319199632,
    (3, 2, 1): 0.021157661967896126,
    (10, 0, 0): 0.007978261541929406,
}


@pytest.fixture(scope="module")
def table12():
    return green_table(12, 64)


def test_origin_matches_watson_closed_form():
    assert WATSON / 6 == pytest.approx(FROZEN[(0, 0, 0)], abs=1e-12)
    assert abs(green_function((0, 0, 0)) - 0.252731) < 1e-6


@pytest.mark.parametrize("a", sorted(FROZEN))
def test_values_against_frozen_oracle(a):
    assert abs(green_function(a, 128) - FROZEN[a]) < 1e-8
    assert abs(green_function(a, 64) - FROZEN[a]) < 1e-6
    assert abs(green_bessel(a) - FROZEN[a]) < 1e-9


def test_oracle_reproduces_frozen_value():
    assert oracles.bessel_green((3, 2, 1)) == pytest.approx(FROZEN[(3, 2, 1)], abs=1e-13)


def test_resolution_guard():
    with pytest.raises(ValueError):
        green_function((0, 0, 0), 32)
    with pytest.raises(ValueError):
        green_values(np.array([[40, 0, 0]]), 64)
    with pytest.raises(ValueError):
        green_table(40, 64)


def test_cutoff_is_smooth_step():
    q = np.array([0.0, 0.5, 1.2, 3.0])
    w = cutoff(q)
    assert w[0] == 1.0 and w[-1] == 0.0
    assert np.all(np.diff(cutoff(np.linspace(0, 3, 200))) <= 0)


def test_fundamental_domain():
    F = fundamental_domain(3)
    assert len(F) == math.comb(3 + 3, 3)
    assert all(x <= y <= z for x, y, z in F)


@given(st.tuples(*[st.integers(-12, 12)] * 3), st.permutations([0, 1, 2]),
       st.tuples(*[st.sampled_from([1, -1])] * 3))
def test_table_lattice_symmetry(table12, a, perm, signs):
    b = tuple(signs[i] * a[perm[i]] for i in range(3))
    assert table12(b) == table12(a)


def test_table_symmetry_and_roundtrip(table12, tmp_path):
    a = (2, -5, 3)
    vals = {table12(tuple(s * p for s, p in zip(sg, perm)))
            for perm in itertools.permutations(a) for sg in itertools.product((1, -1), repeat=3)}
    assert len(vals) == 1
    p = tmp_path / "g.txt"
    table12.save(str(p))
    T = GreenTable.load(str(p))
    assert T.values == table12.values and T.cap == 12 and T.resolution == 64
    with pytest.raises(KeyError):
        table12((13, 0, 0))


def test_harmonic_away_from_origin(table12):
    assert abs(neg_laplacian_G(table12, (0, 0, 0)) - 1) < 1e-5
    worst = max(abs(neg_laplacian_G(table12, tuple(int(v) for v in a)))
                for a in fundamental_domain(10) if 0 < np.linalg.norm(a) <= 10)
    assert worst < 1e-5


def test_far_field_constant():
    T = green_table(20, 64)
    mean, spread = fit_far_constant(T, 10, 20)
    assert spread < 0.05
    assert mean == pytest.approx(1 / (4 * math.pi), rel=5e-3)


def test_lifshitz_u_exact_without_quadratic(table12):
    u = lifshitz_u(table12, Cube((0, 0, 0), 11), 4.0, 0.0)
    lap = -laplacian_array(u, Cube((0, 0, 0), 10))
    target = np.zeros_like(lap)
    target[10, 10, 10] = -1.0
    assert np.max(np.abs(lap - target)) < 1e-5


def test_lifshitz_test_function_r8():
    T = green_table(26, 128)
    dom = Cube((0, 0, 0), 2)
    imp = periodic_impurities(Cube((0, 0, 0), 2 + 24 + 8), 8)
    L = lifshitz_test_function(T, 8.0, 1e-3, dom, imp)
    assert L.residual <= 1e-4 and L.positive and L.bounds_ok
    outer, inner = min_max_check(L.u, 8.0)
    assert outer >= inner


def test_lifshitz_positivity_failure(table12):
    with pytest.raises(ValueError):
        lifshitz_test_function(table12, 3.0, 5.0, Cube((0, 0, 0), 1),
                               periodic_impurities(Cube((0, 0, 0), 12), 3))


def test_principal_bounds_examples():
    Q = Cube((0, 0, 0), 6)
    one = LatticeField.constant(Q, 1.0)
    b = principal_eigenvalue_bounds(Q, one, 1.0)
    assert b.lam0 >= 1.0 and b.rayleigh == math.inf
    for R in (2, 3):
        V = periodic_impurities(Q, R)
        b = principal_eigenvalue_bounds(Q, V, R)
        assert b.ok and b.lam0 <= b.rayleigh
    with pytest.raises(ValueError):
        principal_eigenvalue_bounds(Q, periodic_impurities(Q, 6), 2.0)


def test_density_check():
    Q = Cube((0, 0, 0), 4)
    assert impurity_density_ok(periodic_impurities(Q, 2), Q, 2.0)
    assert not impurity_density_ok(LatticeField.constant(Q, 0.0), Q, 100.0)


def test_grid_potential_fills():
    Q = Cube((0, 0, 0), 3)
    V0 = grid_potential(Q, 1, 0, 2, "zeros")
    V1 = grid_potential(Q, 1, 0, 2, "ones")
    off = [i for i, a in enumerate(Q.sites()) if any(x % 2 for x in a)]
    assert set(V0.vector()[off]) == {0.0} and set(V1.vector()[off]) == {1.0}
    on = [i for i, a in enumerate(Q.sites()) if not any(x % 2 for x in a)]
    assert np.array_equal(V0.vector()[on], V1.vector()[on])


def test_base_case_constant_potential_sanity():
    # V ≡ 1: G = (H_free + 1)^{-1} entrywise decays, both bounds hold
    r = base_case_trial(8, 0.09, 1.0, 0.0, 0, 0)
    assert r.norm <= r.norm_bound
    n = 8
    H = assemble(Cube((0, 0, 0), n), 1.0)
    lam0 = eig_extremal(H, 1)[0][0]
    assert 1 / lam0 <= math.exp(n ** 0.18)


def test_base_case_lambda_zero_norm_is_inverse_eigenvalue():
    r = base_case_trial(6, 0.09, 1.0, 0.0, 3, 1)
    assert r.fills == ("zeros",)
    Q = Cube((0, 0, 0), 6)
    from andersonlab.green_base import grid_potential as gp
    lam0 = eig_extremal(assemble(Q, gp(Q, 3, 1, 1, "zeros")), 1)[0][0]
    assert r.norm == pytest.approx(1 / lam0, rel=1e-5)


def test_base_case_probe_validation_and_determinism():
    with pytest.raises(ValueError):
        base_case_probe(8, 0.2, 1.0, 0.0, 2, 0)
    with pytest.raises(ValueError):
        base_case_probe(8, 0.05, 0.0, 0.0, 2, 0)
    a = base_case_probe(6, 0.09, 1.0, 0.0, 3, 5)
    b = base_case_probe(6, 0.09, 1.0, 0.0, 3, 5)
    assert a == b and len(a.trials) == 3 and a.ci[0] <= a.frequency <= a.ci[1]
