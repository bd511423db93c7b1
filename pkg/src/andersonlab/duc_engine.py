"""Frozen-site sets, the recursive Θ construction and DUC counting statistics.

Graded sets are unions of open balls. E₀ holds unit balls with integer
centres; the higher levels E_i are scattered families of radius l_i split
into N groups whose members keep a distance of at least l_i^{1+ε}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

from .cone_chains import ChainError, build_chain, check_solution
from .fields_operator import LatticeField
from .lattice_core import Cube, Cuboid, Site, add, even_cuboid_between, sub

Point = tuple[Union[int, Fraction, float], ...]

ALPHA = 1.251
P_REFERENCE = ALPHA / 3 + 13 / 12
LITERAL_N0 = 10 ** 8   # the cardinality bound is only asserted for N0 this large


# graded sets ------------------------------------------------------------------------

@dataclass(frozen=True)
class ScatteredSet:
    N: int
    l: float
    eps: float
    balls: tuple[tuple[Point, int], ...] = ()   # (centre, group)


@dataclass(frozen=True)
class GradedSet:
    C: float
    eps: float
    E0: tuple[Site, ...] = ()
    levels: tuple[ScatteredSet, ...] = ()

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(s.l for s in self.levels)

    def balls(self) -> list[tuple[int, Point, float]]:
        """(level, centre, radius) for every ball; level 0 is E₀."""
        out: list[tuple[int, Point, float]] = [(0, c, 1.0) for c in self.E0]
        for i, s in enumerate(self.levels, start=1):
            out.extend((i, c, s.l) for c, _ in s.balls)
        return out

    def is_empty(self) -> bool:
        return not self.E0 and all(not s.balls for s in self.levels)

    def contains(self, a: Sequence[int]) -> bool:
        """Exact membership of a lattice site in the union of open balls."""
        for _, c, rad in self.balls():
            d2 = sum((Fraction(x) - Fraction(y)) ** 2 for x, y in zip(a, c))
            if d2 < Fraction(rad) ** 2:
                return True
        return False

    def mask(self, sites: np.ndarray) -> np.ndarray:
        """Vectorised membership for an (n, 3) array of lattice sites."""
        out = np.zeros(len(sites), dtype=bool)
        for _, c, rad in self.balls():
            d2 = ((sites - np.asarray(c, dtype=float)) ** 2).sum(axis=1)
            out |= d2 < rad * rad
        return out


def _dist(p: Sequence[float], q: Sequence[float]) -> float:
    return math.sqrt(sum((float(x) - float(y)) ** 2 for x, y in zip(p, q)))


def check_graded(E: GradedSet) -> list[str]:
    """Independent invariant check; returns the list of violated invariants."""
    bad: list[str] = []
    prev = 1.0
    for i, s in enumerate(E.levels, start=1):
        if s.l < 1:
            bad.append(f"level {i}: radius below 1")
        if i >= 2 and prev ** (1 + 2 * E.eps) > s.l * (1 + 1e-12):
            bad.append(f"level {i}: lengths not ε-geometric")
        prev = s.l
        for j, (c, t) in enumerate(s.balls):
            if not 1 <= t <= s.N:
                bad.append(f"level {i}: group index {t} out of range")
            for c2, t2 in s.balls[j + 1:]:
                if t2 == t and _dist(c, c2) - 2 * s.l < s.l ** (1 + s.eps) - 1e-9:
                    bad.append(f"level {i}: balls in group {t} too close")
    for j, c in enumerate(E.E0):
        if any(not isinstance(x, (int, np.integer)) for x in c):
            bad.append("E0 centre not integer")
        for c2 in E.E0[j + 1:]:
            if _dist(c, c2) - 2 < E.C - 1e-9:
                bad.append("E0 balls too close")
    return bad


def graded_sample(region: Cube, N: int, lengths: Sequence[float], C: float, eps: float,
                  counts: Sequence[int], unit_count: int, seed: int,
                  max_tries: int = 10_000) -> GradedSet:
    """Rejection-sample a graded set with centres inside the region.

    ``counts[i]`` balls are requested for level i + 1 (spread round-robin over
    the N groups) and ``unit_count`` unit balls for E₀."""
    if len(counts) != len(lengths):
        raise ValueError("one count per scale length")
    for i in range(1, len(lengths)):
        if lengths[i - 1] ** (1 + 2 * eps) > lengths[i]:
            raise ValueError("scale lengths are not ε-geometric")
    if any(l < 1 for l in lengths):
        raise ValueError("scale lengths must be at least 1")
    rng = np.random.default_rng(seed)
    lo = np.asarray(region.lower)
    hi = np.asarray(region.upper)

    def draw_int() -> Site:
        x = rng.integers(lo, hi + 1)
        return (int(x[0]), int(x[1]), int(x[2]))

    E0: list[Site] = []
    tries = 0
    while len(E0) < unit_count:
        tries += 1
        if tries > max_tries:
            raise ValueError("cannot place the requested unit balls")
        c = draw_int()
        if all(_dist(c, d) - 2 >= C for d in E0):
            E0.append(c)
    levels = []
    for l, cnt in zip(lengths, counts):
        balls: list[tuple[Point, int]] = []
        tries = 0
        while len(balls) < cnt:
            tries += 1
            if tries > max_tries:
                raise ValueError(f"cannot place {cnt} balls of radius {l}")
            c = draw_int()
            t = len(balls) % N + 1
            if all(_dist(c, d) - 2 * l >= l ** (1 + eps) for d, s in balls if s == t):
                balls.append((c, t))
        levels.append(ScatteredSet(N, float(l), eps, tuple(balls)))
    return GradedSet(float(C), eps, tuple(E0), tuple(levels))


# regions for the normality test

def _cube_ball_hit(cube: Cube, centre: Point, radius: float) -> bool:
    # nearest lattice point of the cube, coordinate by coordinate
    near = [min(max(round(float(c)), lo), hi) for c, lo, hi in zip(centre, cube.lower, cube.upper)]
    return _dist(near, centre) < radius


def is_normal(E: GradedSet, A, Cbar: float, eps_bar: float) -> bool:
    """E₀ ∩ A ≠ ∅ ⇒ C̄ ≤ diam A, and E_i ∩ A ≠ ∅ ⇒ l_i ≤ diam(A)^{1-ε̄/2}.

    ``A`` is a Cube (a set of lattice points) or any object exposing
    ``diameter()`` and ``ball_intersects(centre, radius)``."""
    diam = A.diameter()
    if isinstance(A, Cube):
        hit = lambda c, rad: _cube_ball_hit(A, c, rad)
    else:
        hit = A.ball_intersects
    if any(hit(c, 1.0) for c in E.E0) and Cbar > diam:
        return False
    for s in E.levels:
        if any(hit(c, s.l) for c, _ in s.balls) and s.l > diam ** (1 - eps_bar / 2):
            return False
    return True


# Θ construction -------------------------------------------------------------------------

@dataclass(frozen=True)
class ThetaSet:
    points: tuple[Site, ...]
    m: int
    n: int
    center: Site
    log_floor: float   # log of (K+11)^{-12n}|u(centre)|
    case_log: tuple[str, ...] = field(default=(), compare=False)

    def ratio(self) -> float:
        return len(self.points) / (self.n / self.m) ** ALPHA


@dataclass(frozen=True)
class ThetaReport:
    magnitude_ok: bool
    disjoint_ok: bool
    contained_ok: bool
    worst_margin: float

    @property
    def ok(self) -> bool:
        return self.magnitude_ok and self.disjoint_ok and self.contained_ok


class _Frame:
    """Signed permutation acting on offsets from a centre: local = P(x - c)."""

    def __init__(self, center: Site, perm=(0, 1, 2), signs=(1, 1, 1)):
        self.center, self.perm, self.signs = center, tuple(perm), tuple(signs)

    def to_local(self, x: Site) -> Site:
        d = sub(x, self.center)
        return tuple(self.signs[i] * d[self.perm[i]] for i in range(3))  # type: ignore[return-value]

    def to_global(self, y: Site) -> Site:
        d = [0, 0, 0]
        for i in range(3):
            d[self.perm[i]] = self.signs[i] * y[i]
        return add(self.center, (d[0], d[1], d[2]))

    def axis(self, i: int, iota: int) -> tuple[int, int]:
        """Global (tau, iota) for the local direction iota·e_{i+1}."""
        return self.perm[i] + 1, iota * self.signs[i]

    def swap_xy(self) -> "_Frame":
        return _Frame(self.center, (self.perm[1], self.perm[0], self.perm[2]),
                      (self.signs[1], self.signs[0], self.signs[2]))

    def flip(self, i: int) -> "_Frame":
        s = list(self.signs)
        s[i] = -s[i]
        return _Frame(self.center, self.perm, tuple(s))


class _Theta:
    def __init__(self, u: LatticeField, V: LatticeField, Q: Cube, K: float, m: int, N0: int):
        self.u, self.V, self.Q, self.K, self.m, self.N0 = u, V, Q, K, m, N0
        self.log = []

    def chain_end(self, cube: Cube, frame: _Frame, start_local: Site, i: int, depth: int) -> Site:
        """Endpoint of a chain from the start lying at local depth  depth or
        depth + 1 along e_{i+1} (the target set C(depth) ∪ C(depth+1))."""
        if depth >= 0:
            iota, k = 1, depth + 1
        else:
            iota, k = -1, -depth
        tau, giota = frame.axis(i, iota)
        ch = build_chain(self.u, self.V, cube, frame.to_global(start_local), tau, giota, k,
                         K=self.K, verified=True)
        return frame.to_local(ch.end)

    def run(self, center: Site, n: int) -> list[Site]:
        m = self.m
        if n < m:
            return []
        if n <= self.N0 * m + 7:
            return [center]
        n = 8 * (n // 8)
        cube = Cube(center, n)
        f = _Frame(center)
        zero = (0, 0, 0)
        a1 = self.chain_end(cube, f, zero, 2, n // 2)
        a2 = self.chain_end(cube, f, zero, 2, -n // 2 - 1)
        a = {
            (1, 1): self.chain_end(cube, f, a1, 2, n // 4 - 1),
            (1, 2): self.chain_end(cube, f, a1, 2, -n // 4),
            (2, 1): self.chain_end(cube, f, a2, 2, n // 4 - 1),
            (2, 2): self.chain_end(cube, f, a2, 2, -n // 4),
        }
        pts: list[Site] = []
        for key in ((1, 1), (1, 2), (2, 1), (2, 2)):
            pts.extend(self.run(f.to_global(a[key]), n // 4 - 3))
        # the gap bookkeeping happens in local frame coordinates
        ex = self._extra(cube, f, n, a1, a2, a)
        pts.extend(ex)
        return pts

    def _boxes(self, n, a1, a2, a):
        Q1 = even_cuboid_between(Cube(a1, n // 2 - 2), Cube(a1, n // 2 - 1))
        Q2 = even_cuboid_between(Cube(a2, n // 2 - 2), Cube(a2, n // 2 - 1))
        Qij = {k: even_cuboid_between(Cube(v, n // 4 - 3), Cube(v, n // 4 - 2)) for k, v in a.items()}
        return Q1, Q2, Qij

    def _extra(self, cube: Cube, f: _Frame, n: int, a1: Site, a2: Site, a: dict) -> list[Site]:
        Q1, Q2, Qij = self._boxes(n, a1, a2, a)
        keys = list(Qij)
        for i, k1 in enumerate(keys):
            for k2 in keys[i + 1:]:
                if Qij[k1].intersects(Qij[k2]):
                    raise ChainError("subcube cuboids overlap")
        B = Cuboid.hull(Q1, Q2)
        B1 = Cuboid.hull(Qij[(1, 1)], Qij[(1, 2)])
        B2 = Cuboid.hull(Qij[(2, 1)], Qij[(2, 2)])

        def gaps(ax: int) -> int:
            g = (n - B.hi[ax]) + (B.lo[ax] + n)
            g += (Q1.hi[ax] - B1.hi[ax]) + (B1.lo[ax] - Q1.lo[ax])
            g += (Q2.hi[ax] - B2.hi[ax]) + (B2.lo[ax] - Q2.lo[ax])
            return g

        gx, gy = gaps(0), gaps(1)
        if gx < n + 3:
            if gy < n + 3:
                raise ChainError("gap sums below n + 3 in both directions")
            f = f.swap_xy()
            a1, a2 = _swap(a1), _swap(a2)
            a = {k: _swap(v) for k, v in a.items()}
        if a1[0] > a2[0]:
            f = f.flip(0)
            a1, a2 = _neg0(a1), _neg0(a2)
            a = {k: _neg0(v) for k, v in a.items()}
        Q1, Q2, Qij = self._boxes(n, a1, a2, a)
        B1 = Cuboid.hull(Qij[(1, 1)], Qij[(1, 2)])
        B2 = Cuboid.hull(Qij[(2, 1)], Qij[(2, 2)])
        zero = (0, 0, 0)
        out: list[Site] = []
        tasks: list[tuple[Site, int]] = []
        if B2.hi[0] <= Q1.hi[0] or B1.lo[0] >= Q2.lo[0]:
            Qs = Q1 if B2.hi[0] <= Q1.hi[0] else Q2
            self.log.append(f"n={n}:case1")
            I1 = (Qs.lo[0] + n) // 2 - 2
            I2 = (n - Qs.hi[0]) // 2 - 2
            for depth, I in (((Qs.lo[0] - n) // 2, I1), ((Qs.hi[0] + n) // 2, I2)):
                if I > self.m:
                    tasks.append((self.chain_end(cube, f, zero, 0, depth), I))
        else:
            self.log.append(f"n={n}:case2")
            specs = [
                (zero, (B1.lo[0] - n) // 2, (B1.lo[0] + n) // 2 - 2),
                (zero, (B2.hi[0] + n) // 2, (n - B2.hi[0]) // 2 - 2),
                (a1, (B1.hi[0] + Q1.hi[0]) // 2 - a1[0], (Q1.hi[0] - B1.hi[0]) // 2 - 2),
                (a2, (B2.lo[0] + Q2.lo[0]) // 2 - a2[0], (B2.lo[0] - Q2.lo[0]) // 2 - 2),
            ]
            for start, depth, J in specs:
                if J > self.m:
                    tasks.append((self.chain_end(cube, f, start, 0, depth), J))
        for c, R in tasks:
            out.extend(self.run(f.to_global(c), R))
        return out


def _swap(p: Site) -> Site:
    return (p[1], p[0], p[2])


def _neg0(p: Site) -> Site:
    return (-p[0], p[1], p[2])


def theta_construct(u: LatticeField, V: LatticeField, Q: Cube, m: int, K: float, N0: int = 4,
                    residual_tol: float = 1e-8, paper_mode: bool = False) -> ThetaSet:
    """Recursive separated set of large-|u| sites from greedy cone chains.

    The equation is checked once on Q; the recursion then works on
    subcubes re-centred at chain endpoints."""
    n = Q.r
    if not 1 <= m <= n:
        raise ValueError("need 1 ≤ m ≤ n")
    if N0 < 4:
        raise ValueError("N0 must be at least 4")
    check_solution(u, V, Q, tol=residual_tol)
    Kobs = float(np.max(np.abs(V.restrict(Q).values)))
    if Kobs > K * (1 + 1e-12):
        raise ValueError(f"‖V‖∞ = {Kobs} exceeds K = {K}")
    u0 = abs(u[Q.center])
    if u0 == 0:
        raise ValueError("u vanishes at the centre")
    builder = _Theta(u, V, Q, K, m, N0)
    pts = builder.run(Q.center, n)
    floor = math.log(u0) - 12 * n * math.log(K + 11)
    out = ThetaSet(tuple(pts), m, n, Q.center, floor, tuple(builder.log))
    if paper_mode and N0 >= LITERAL_N0:
        beta = (N0 + 7) ** (-ALPHA)
        if len(pts) < beta * (n / m) ** ALPHA:
            raise AssertionError("cardinality bound violated")
    return out


def verify_theta(theta: ThetaSet, u: LatticeField, Q: Cube) -> ThetaReport:
    """Recheck magnitude, Q_m-disjointness and Q_m-containment from scratch."""
    m = theta.m
    worst = math.inf
    mag = True
    for b in theta.points:
        val = abs(u.get(b))
        lv = math.log(val) if val > 0 else -math.inf
        worst = min(worst, lv - theta.log_floor)
        mag = mag and lv >= theta.log_floor
    P = np.asarray(theta.points, dtype=np.int64).reshape(-1, 3)
    disj = True
    if len(P) > 1:
        d = np.abs(P[:, None, :] - P[None, :, :]).max(axis=2)
        np.fill_diagonal(d, 2 * m + 1)
        disj = bool((d > 2 * m).all())
    lo, hi = np.asarray(Q.lower), np.asarray(Q.upper)
    cont = bool(((P - m >= lo) & (P + m <= hi)).all())
    return ThetaReport(mag, disj, cont, worst if worst != math.inf else 0.0)


# DUC statistics ----------------------------------------------------------------------

@dataclass(frozen=True)
class DucCount:
    n: int
    count: int
    log_threshold: float


def duc_count(u: LatticeField, Q: Cube, rate: float, mode: str = "linear",
              E: GradedSet | None = None, V: LatticeField | None = None,
              residual_tol: float = 1e-8) -> DucCount:
    """#{a ∈ Q_n ∖ E : |u(a)| ≥ e^{-C n}|u(0)|} (cubic mode uses e^{-C n³})."""
    n = Q.r
    if V is not None:
        check_solution(u, V, Q, tol=residual_tol)
    u0 = abs(u[Q.center])
    if u0 == 0:
        raise ValueError("u(0) = 0")
    if mode == "linear":
        lt = math.log(u0) - rate * n
    elif mode == "cubic":
        lt = math.log(u0) - rate * n ** 3
    else:
        raise ValueError("mode must be linear or cubic")
    vals = np.abs(u.restrict(Q).values).ravel()
    with np.errstate(divide="ignore"):
        logs = np.log(vals)
    keep = logs >= lt
    if E is not None and not E.is_empty():
        sites = np.asarray(Q.sites(), dtype=np.int64)
        keep &= ~E.mask(sites)
    return DucCount(n, int(keep.sum()), lt)


def fit_exponent(ns: Sequence[int], counts: Sequence[int]) -> float:
    """Least-squares slope of log count against log n."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(counts, dtype=float))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


@dataclass(frozen=True)
class DucStatistic:
    counts: tuple[DucCount, ...]
    exponent: float
    reference: float = P_REFERENCE


def duc_statistic(fields: Iterable[tuple[LatticeField, Cube]], rate: float, mode: str = "linear",
                  E: GradedSet | None = None) -> DucStatistic:
    cs = tuple(duc_count(u, Q, rate, mode, E) for u, Q in fields)
    exp = fit_exponent([c.n for c in cs], [c.count for c in cs]) if len(cs) >= 2 else math.nan
    return DucStatistic(cs, exp)
