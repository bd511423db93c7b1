"""Greedy cone chains for solutions of Δu = Vu and the plane-anchor search.

From a site a, one of the six sites a + v + {0, ±e_i} (minus a) carries at
least a (K+11)^{-1} fraction of |u(a)|. Iterating along a fixed axis walks
down a cone while losing at most that factor per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .fields_operator import LatticeField, equation_residual
from .lattice_core import (
    LAMBDA, UNIT_STEPS, Cube, Site, add, axis_vector, cone_membership, cone_section, dot, sub,
)

PRECONDITION_TOL = 1e-9


class ChainError(ValueError):
    pass


@dataclass(frozen=True)
class Chain:
    sites: tuple[Site, ...]
    tau: int
    iota: int
    k: int
    K: float
    values: tuple[float, ...] = field(repr=False)

    @property
    def start(self) -> Site:
        return self.sites[0]

    @property
    def end(self) -> Site:
        return self.sites[-1]

    @property
    def length(self) -> int:
        return len(self.sites) - 1

    def depth(self, b: Site | None = None) -> int:
        b = self.end if b is None else b
        return self.iota * (b[self.tau - 1] - self.start[self.tau - 1])

    def ratios(self) -> list[float]:
        return [abs(b) / abs(a) if a != 0 else math.inf
                for a, b in zip(self.values, self.values[1:])]

    def csv_rows(self) -> list[str]:
        rows = []
        prev = None
        for i, (s, v) in enumerate(zip(self.sites, self.values)):
            ratio = "" if prev is None else repr(abs(v) / abs(prev)) if prev else "inf"
            rows.append(f"{i},{s[0]},{s[1]},{s[2]},{abs(v)!r},{ratio}")
            prev = v
        return rows


def step_offsets(tau: int, iota: int) -> list[Site]:
    """The six allowed increments iota·e_tau + {0, ±e_1, ±e_2, ±e_3}, minus 0."""
    v = axis_vector(tau, iota)
    offs = [v] + [add(v, e) for e in UNIT_STEPS]
    return sorted({o for o in offs if o != (0, 0, 0)})


def _argmax_abs(u: Callable[[Site], float], candidates: Iterable[Site]) -> tuple[Site, float]:
    best: Site | None = None
    best_val = -1.0
    for c in sorted(candidates):
        val = abs(u(c))
        if val > best_val:
            best, best_val = c, val
    if best is None:
        raise ChainError("empty candidate set")
    return best, best_val


def local_step(u: LatticeField, a: Site, v: Site, K: float = 0.0) -> tuple[Site, float]:
    """argmax of |u| over a + v + {0, ±e_i} minus {a}; lexicographic ties.

    Returns the site and |u(b)|/|u(a)|. When |Δu(a+v)| ≤ K|u(a+v)| the ratio
    is at least 1/(K+11)."""
    c = add(a, v)
    cands = [c] + [add(c, e) for e in UNIT_STEPS]
    b, val = _argmax_abs(u.get, (x for x in cands if x != a))
    ua = abs(u[a])
    return b, (val / ua if ua else math.inf)


def _greedy(u: Callable[[Site], float], a: Site, tau: int, iota: int, k: int,
            allowed: Callable[[Site], bool] | None = None) -> list[Site]:
    offs = step_offsets(tau, iota)
    i = tau - 1
    path = [a]
    cur = a
    while iota * (cur[i] - a[i]) < k - 1:
        cands = [add(cur, o) for o in offs]
        if allowed is not None:
            cands = [c for c in cands if allowed(c)]
        cur, _ = _argmax_abs(u, cands)
        path.append(cur)
    return path


def _make(u: LatticeField, path: list[Site], tau: int, iota: int, k: int, K: float) -> Chain:
    return Chain(tuple(path), tau, iota, k, float(K), tuple(u[s] for s in path))


def check_solution(u: LatticeField, V: LatticeField, Q: Cube, shift: float = 0.0,
                   tol: float = PRECONDITION_TOL) -> float:
    res = equation_residual(u, V, Q, shift)
    if res > tol:
        raise ChainError(f"field does not solve Δu = (V - {shift})u on {Q}: residual {res:.3e}")
    return res


def build_chain(u: LatticeField, V: LatticeField, Q: Cube, a: Site, tau: int, iota: int,
                k: int, K: float | None = None, verified: bool = False) -> Chain:
    """Greedy chain from a to the cone section at depth k - 1 or k."""
    if k < 0:
        raise ChainError("k must be nonnegative")
    if iota not in (1, -1):
        raise ChainError("iota must be ±1")
    if a not in Q.shrink(2):
        raise ChainError(f"start {a} not in {Q.shrink(2)}")
    if k > 0 and not all(b in Q for b in _section_corners(a, tau, iota * k)):
        raise ChainError("cone section leaves the cube")
    if not verified:
        check_solution(u, V, Q)
    if K is None:
        K = float(np.max(np.abs(V.restrict(Q).values)))
    path = _greedy(u.get, a, tau, iota, k)
    return _make(u, path, tau, iota, k, K)


def _section_corners(a: Site, tau: int, k: int) -> list[Site]:
    # the section is an l1 diamond; its four tips bound it in l∞
    m = abs(k)
    base = list(a)
    base[tau - 1] += k
    others = [j for j in range(3) if j != tau - 1]
    tips = []
    for j in others:
        for s in (m, -m):
            p = list(base)
            p[j] += s
            tips.append((p[0], p[1], p[2]))
    return tips


def build_chain_dirichlet(u: LatticeField, V: LatticeField, Q: Cube, lam: float, a: Site,
                          tau: int, iota: int, k: int, K: float | None = None,
                          verified: bool = False) -> Chain:
    """Chain for an eigenvector of H_Q: candidates are clipped to Q and the
    potential is V - lam."""
    if k < 0:
        raise ChainError("k must be nonnegative")
    if a not in Q:
        raise ChainError(f"start {a} outside {Q}")
    if k > 0 and not any(b in Q for b in cone_section(a, tau, iota * k)):
        raise ChainError("cone section misses the cube")
    if not verified:
        zu = LatticeField(u.domain, u.values, zero_extend=True)
        check_solution(zu, V, Q, shift=lam)
    if K is None:
        K = float(np.max(np.abs(V.restrict(Q).values - lam)))
    path = _greedy(u.get, a, tau, iota, k, allowed=lambda c: c in Q)
    return _make(u, path, tau, iota, k, K)


@dataclass(frozen=True)
class ChainReport:
    steps_ok: bool
    cone_ok: bool
    depth_ok: bool
    ratio_ok: bool
    end_bound_ok: bool
    worst_log_ratio: float

    @property
    def ok(self) -> bool:
        return self.steps_ok and self.cone_ok and self.depth_ok and self.ratio_ok and self.end_bound_ok


def verify_chain(chain: Chain, u: Callable[[Site], float], K: float | None = None,
                 within: Cube | None = None) -> ChainReport:
    """Re-check every chain invariant from scratch against the field."""
    K = chain.K if K is None else K
    a0 = chain.sites[0]
    i = chain.tau - 1
    e = [0, 0, 0]
    e[i] = chain.iota
    allowed = {(e[0], e[1], e[2])}
    for j in range(3):
        for s in (1, -1):
            d = list(e)
            d[j] += s
            allowed.add((d[0], d[1], d[2]))
    allowed.discard((0, 0, 0))
    steps_ok = all(sub(b, a) in allowed for a, b in zip(chain.sites, chain.sites[1:]))
    if within is not None:
        steps_ok = steps_ok and all(b in within for b in chain.sites)
    cone_ok = all(cone_membership(a0, chain.tau, b) for b in chain.sites)
    depth = chain.iota * (chain.sites[-1][i] - a0[i])
    depth_ok = depth in (chain.k - 1, chain.k) or (chain.k <= 1 and depth == 0)
    vals = [abs(u(b)) for b in chain.sites]
    log_bound = -math.log(K + 11.0)
    worst = math.inf
    ratio_ok = True
    for p, q in zip(vals, vals[1:]):
        lr = (math.log(q) if q > 0 else -math.inf) - math.log(p) if p > 0 else math.inf
        worst = min(worst, lr)
        if p > 0 and lr < log_bound - 1e-12:
            ratio_ok = False
    end_ok = vals[0] == 0 or (vals[-1] > 0 and math.log(vals[-1]) - math.log(vals[0])
                               >= chain.length * log_bound - 1e-12 and chain.length <= max(chain.k, 0))
    return ChainReport(steps_ok, cone_ok, depth_ok, ratio_ok, end_ok, worst if worst != math.inf else 0.0)


# plane anchors ----------------------------------------------------------------------------

@dataclass(frozen=True)
class PlaneAnchors:
    tau: int
    anchors: tuple[Site, ...]
    values: tuple[float, ...]


def find_plane_anchors(u: LatticeField, V: LatticeField | None, Q: Cube, K: float,
                       verified: bool = False, shift: float = 0.0) -> PlaneAnchors:
    """Least tau in 1..4 such that every i ≤ n/10 has a site in
    (P_{tau,i} ∪ P_{tau,i+1}) ∩ C_0^3 ∩ Q_{n/10+1} with
    |u| ≥ (K+11)^{-n}|u(0)|; anchors are the max-|u| witnesses."""
    n = Q.r
    origin = Q.center
    if V is not None and not verified:
        check_solution(u, V, Q, shift)
    u0 = abs(u[origin])
    if u0 == 0:
        raise ChainError("u vanishes at the center")
    floor_log = math.log(u0) - n * math.log(K + 11.0)
    top = n // 10
    small = Cube(origin, top + 1)
    box = [b for b in small.sites() if cone_membership(origin, 3, b)]
    for tau in (1, 2, 3, 4):
        lam = LAMBDA[tau]
        levels: dict[int, list[Site]] = {}
        for b in box:
            levels.setdefault(dot(sub(b, origin), lam), []).append(b)
        anchors, values = [], []
        for i in range(top + 1):
            cands = levels.get(i, []) + levels.get(i + 1, [])
            if not cands:
                break
            b, val = _argmax_abs(u.get, cands)
            if val <= 0 or math.log(val) < floor_log:
                break
            anchors.append(b)
            values.append(u[b])
        else:
            return PlaneAnchors(tau, tuple(anchors), tuple(values))
    raise ChainError("no tau found: hypotheses of the anchor search are violated")


def chain_stream(chains: Sequence[Chain]) -> list[str]:
    out = []
    for c in chains:
        out.extend(c.csv_rows())
    return out
