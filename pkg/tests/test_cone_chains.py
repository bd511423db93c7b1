import math

import pytest
from hypothesis import given, strategies as st

from andersonlab.cone_chains import (
    ChainError, build_chain, build_chain_dirichlet, chain_stream, check_solution, find_plane_anchors,
    local_step, step_offsets, verify_chain,
)
from andersonlab.fields_operator import (
    LatticeField, assemble, bernoulli_potential, cauchy_solution, eig_extremal, sharp_example,
)
from andersonlab.lattice_core import Cube, cone_membership

E_S = 3 + 2 * math.sqrt(2)


def zero(Q):
    return LatticeField.constant(Q, 0.0)


def ground_state(Q, V):
    w, v = eig_extremal(assemble(Q, V), 1)
    return float(w[0]), LatticeField(Q, v[:, 0], zero_extend=True)


def test_step_offsets():
    offs = step_offsets(3, 1)
    assert (0, 0, 1) in offs and (0, 0, 2) in offs and (1, 0, 1) in offs
    assert (0, 0, 0) not in offs and len(offs) == 6


def test_local_step_examples():
    u = sharp_example(Cube((0, 0, 0), 3))
    b, ratio = local_step(u, (0, 0, 0), (0, 0, 1))
    assert b == (0, 0, 2)   # the greedy argmax looks one layer further along e3
    assert ratio == pytest.approx(E_S ** 2, rel=1e-12)
    one = LatticeField.constant(Cube((0, 0, 0), 3), 1.0)
    b, ratio = local_step(one, (0, 0, 0), (1, 0, 0))
    assert ratio == 1.0 and ratio >= 1 / 11


def test_build_chain_trivial_and_sharp():
    Q = Cube((0, 0, 0), 8)
    u = sharp_example(Cube((0, 0, 0), 9))
    c0 = build_chain(u, zero(Q), Q, (0, 0, 0), 3, 1, 0)
    assert c0.sites == ((0, 0, 0),)
    c = build_chain(u, zero(Q), Q, (0, 0, 0), 3, 1, 5)
    assert all(s[0] == s[1] == 0 for s in c.sites)
    assert c.depth() in (4, 5)
    assert all(r == pytest.approx(E_S ** (s[2] - p[2]), rel=1e-12)
               for r, p, s in zip(c.ratios(), c.sites, c.sites[1:]))
    assert verify_chain(c, u.get).ok


def test_build_chain_errors():
    Q = Cube((0, 0, 0), 4)
    u = sharp_example(Cube((0, 0, 0), 5))
    with pytest.raises(ChainError):
        build_chain(u, zero(Q), Q, (0, 0, 0), 3, 2, 1)
    with pytest.raises(ChainError):
        build_chain(u, zero(Q), Q, (0, 0, 0), 3, 1, 9)
    bad = LatticeField.constant(Cube((0, 0, 0), 5), 1.0)
    bad.values[5, 5, 5] = 3.0
    with pytest.raises(ChainError):
        check_solution(bad, zero(Q), Q)


def test_dirichlet_chain_on_free_ground_state():
    Q = Cube((0, 0, 0), 4)
    lam, u = ground_state(Q, zero(Q))
    c = build_chain_dirichlet(u, zero(Q), Q, lam, (0, 0, 0), 3, 1, 3, K=13.0)
    rep = verify_chain(c, u.get, within=Q)
    assert rep.ok
    assert abs(u[c.end]) >= 24.0 ** -3 * abs(u[(0, 0, 0)])
    assert build_chain_dirichlet(u, zero(Q), Q, lam, (0, 0, 0), 3, 1, 0).sites == ((0, 0, 0),)


def test_bernoulli_q8_chain():
    Q = Cube((0, 0, 0), 8)
    V = bernoulli_potential(Q, 1)
    lam, u = ground_state(Q, V)
    c = build_chain_dirichlet(u, V, Q, lam, (0, 0, 0), 1, -1, 4, K=13.0)
    assert c.depth() in (3, 4)
    assert all(r >= 1 / 24 for r in c.ratios())


@given(st.integers(0, 2 ** 32), st.integers(1, 3), st.sampled_from([1, -1]), st.integers(0, 3))
def test_chain_invariants_on_cauchy_fields(seed, tau, iota, k):
    Q = Cube((0, 0, 0), 5)
    V = bernoulli_potential(Q, seed)
    u = cauchy_solution(Q, V, seed)
    c = build_chain(u, V, Q, (0, 0, 0), tau, iota, k)
    rep = verify_chain(c, u.get, K=1.0)
    assert rep.ok, rep
    i = tau - 1
    assert all(cone_membership((0, 0, 0), tau, s) for s in c.sites)
    assert all(iota * (q[i] - p[i]) >= 1 for p, q in zip(c.sites, c.sites[1:]))


def test_verify_chain_detects_tampering():
    Q = Cube((0, 0, 0), 8)
    u = sharp_example(Cube((0, 0, 0), 9))
    c = build_chain(u, zero(Q), Q, (0, 0, 0), 3, 1, 4)
    tampered = type(c)(c.sites[:1] + ((5, 5, 1),) + c.sites[2:], c.tau, c.iota, c.k, c.K, c.values)
    assert not verify_chain(tampered, u.get).ok


def test_plane_anchors_examples():
    Q = Cube((0, 0, 0), 40)
    u = sharp_example(Cube((0, 0, 0), 41))
    pa = find_plane_anchors(u, zero(Q), Q, 0.0)
    assert pa.tau == 1 and len(pa.anchors) == 5
    assert all(a[0] == a[1] for a in pa.anchors)
    one = LatticeField.constant(Cube((0, 0, 0), 21), 1.0)
    assert find_plane_anchors(one, zero(Cube((0, 0, 0), 20)), Cube((0, 0, 0), 20), 0.0).tau == 1


def test_chain_stream_rows():
    Q = Cube((0, 0, 0), 8)
    u = sharp_example(Cube((0, 0, 0), 9))
    c = build_chain(u, zero(Q), Q, (0, 0, 0), 3, 1, 3)
    rows = chain_stream([c])
    assert rows[0].startswith("0,0,0,0,1.0,")
    assert len(rows) == len(c.sites)
