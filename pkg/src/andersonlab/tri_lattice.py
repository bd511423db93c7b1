"""Triangular lattice Λ = {sξ + tη}, ξ = (-1, 0), η = (1/2, √3/2).

Points are integer pairs (s, t). Functions on Λ are dicts keyed by these
pairs, holding ints, Fractions or floats; the recurrences below never
convert, so integer input stays exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence, Union

TriPoint = tuple[int, int]
Number = Union[int, float, Fraction]
Field2 = dict[TriPoint, Number]

XI: TriPoint = (1, 0)     # the basis vector ξ in (s, t) coordinates
ETA: TriPoint = (0, 1)
GAMMA: TriPoint = (1, 1)  # ξ + η

EPS1 = 1e-18


def embed(p: TriPoint) -> tuple[float, float]:
    s, t = p
    return (-s + 0.5 * t, 0.5 * math.sqrt(3.0) * t)


def tadd(p: TriPoint, q: TriPoint) -> TriPoint:
    return (p[0] + q[0], p[1] + q[1])


def tsub(p: TriPoint, q: TriPoint) -> TriPoint:
    return (p[0] - q[0], p[1] - q[1])


def three_sum(u: Mapping[TriPoint, Number], b: TriPoint) -> Number:
    """u(b) + u(b - ξ) + u(b + η)."""
    s, t = b
    return u[(s, t)] + u[(s - 1, t)] + u[(s, t + 1)]


# regions -------------------------------------------------------------------------

@dataclass(frozen=True)
class Triangle:
    """T_{a;n} = {a + sξ + tη : -n ≤ t ≤ 2n, t - n ≤ s ≤ n}."""

    a: TriPoint
    n: int

    def rows(self) -> dict[int, tuple[int, int]]:
        n, (a0, a1) = self.n, self.a
        return {a1 + t: (a0 + t - n, a0 + n) for t in range(-n, 2 * n + 1)}

    def sites(self) -> list[TriPoint]:
        return [(s, t) for t, (lo, hi) in sorted(self.rows().items()) for s in range(lo, hi + 1)]

    def __contains__(self, p: object) -> bool:
        s, t = p[0] - self.a[0], p[1] - self.a[1]  # type: ignore[index]
        return -self.n <= t <= 2 * self.n and t - self.n <= s <= self.n

    def size(self) -> int:
        return (3 * self.n + 1) * (3 * self.n + 2) // 2

    def xi_edge(self) -> list[TriPoint]:
        t = self.a[1] - self.n
        lo, hi = self.rows()[t]
        return [(s, t) for s in range(lo, hi + 1)]


@dataclass(frozen=True)
class Trapezoid:
    """P_{a;m,ℓ} = {a + sξ + tη : -ℓ ≤ t ≤ 0, -m + t ≤ s ≤ 0}."""

    a: TriPoint
    m: int
    ell: int

    def rows(self) -> dict[int, tuple[int, int]]:
        a0, a1 = self.a
        return {a1 + t: (a0 - self.m + t, a0) for t in range(-self.ell, 1)}

    def sites(self) -> list[TriPoint]:
        return [(s, t) for t, (lo, hi) in sorted(self.rows().items()) for s in range(lo, hi + 1)]

    def __contains__(self, p: object) -> bool:
        s, t = p[0] - self.a[0], p[1] - self.a[1]  # type: ignore[index]
        return -self.ell <= t <= 0 and -self.m + t <= s <= 0

    def upper_edge(self) -> list[TriPoint]:
        return [(self.a[0] - j, self.a[1]) for j in range(self.m, -1, -1)]

    def lower_edge(self) -> list[TriPoint]:
        t = self.a[1] - self.ell
        lo, hi = self.rows()[t]
        return [(s, t) for s in range(lo, hi + 1)]

    def left_leg(self) -> list[TriPoint]:
        """The points a - tη, 0 ≤ t ≤ ℓ."""
        return [(self.a[0], self.a[1] - t) for t in range(self.ell + 1)]

    def size(self) -> int:
        return (self.ell + 1) * (self.m + 1) + self.ell * (self.ell + 1) // 2


@dataclass(frozen=True)
class RevTrapezoid:
    """P^r_{a;m,ℓ} = {a - tξ - sη : s ≤ t ≤ m, 0 ≤ s ≤ ℓ}."""

    a: TriPoint
    m: int
    ell: int

    def sites(self) -> list[TriPoint]:
        out = [(self.a[0] - t, self.a[1] - s) for s in range(self.ell + 1) for t in range(s, self.m + 1)]
        return sorted(out, key=lambda p: (p[1], p[0]))

    def __contains__(self, p: object) -> bool:
        t, s = self.a[0] - p[0], self.a[1] - p[1]  # type: ignore[index]
        return 0 <= s <= self.ell and s <= t <= self.m

    def upper_edge(self) -> list[TriPoint]:
        return [(self.a[0] - t, self.a[1]) for t in range(self.m + 1)]


Region = Union[Triangle, Trapezoid, RevTrapezoid]


def interior_triples(region: Region) -> list[TriPoint]:
    """All b with {b, b - ξ, b + η} inside the region."""
    pts = set(region.sites())
    return [b for b in region.sites()
            if (b[0] - 1, b[1]) in pts and (b[0], b[1] + 1) in pts]


# propagation -----------------------------------------------------------------------

def propagate(row: Mapping[int, Number], t0: int, height: int,
              f: Callable[[TriPoint], Number] | Mapping[TriPoint, Number] | None = None) -> Field2:
    """Fill rows t0+1 .. t0+height from row t0 with u(b + η) = f(b) - u(b) - u(b - ξ).

    ``row`` maps s to u(s, t0) on a contiguous range [lo, hi]; each new row
    loses its leftmost point, so row t0 + j covers [lo + j, hi].
    """
    if not row:
        raise ValueError("empty initial row")
    lo, hi = min(row), max(row)
    if set(row) != set(range(lo, hi + 1)):
        raise ValueError("initial row must be contiguous")
    if height > hi - lo:
        raise ValueError("initial row too short for the requested height")
    if f is None:
        get_f: Callable[[TriPoint], Number] = lambda b: 0
    elif callable(f):
        get_f = f
    else:
        get_f = f.__getitem__
    u: Field2 = {(s, t0): v for s, v in row.items()}
    for j in range(height):
        t = t0 + j
        for s in range(lo + j + 1, hi + 1):
            b = (s, t)
            u[(s, t + 1)] = get_f(b) - u[b] - u[(s - 1, t)]
    return u


def propagate_triangle(tri: Triangle, edge: Sequence[Number],
                       f: Callable[[TriPoint], Number] | Mapping[TriPoint, Number] | None = None) -> Field2:
    """Field on T_{a;n} from its ξ-edge values (ordered by increasing s)."""
    pts = tri.xi_edge()
    if len(edge) != len(pts):
        raise ValueError(f"edge needs {len(pts)} values")
    row = {p[0]: v for p, v in zip(pts, edge)}
    return propagate(row, pts[0][1], 3 * tri.n, f)


def triangle_growth_bound(S: float, R: float, m: int) -> float:
    """2^{3m}S + (2^{3m} - 1)R."""
    if S < 0 or R < 0:
        raise ValueError("S and R must be nonnegative")
    p = 2 ** (3 * m)
    return p * S + (p - 1) * R


def verify_growth(tri: Triangle, u: Mapping[TriPoint, Number],
                  f: Callable[[TriPoint], Number] | Mapping[TriPoint, Number] | None = None) -> tuple[float, float]:
    """(max |u| on the triangle, bound from the edge and residual sizes)."""
    edge = tri.xi_edge()
    S = max(abs(u[p]) for p in edge)
    trip = interior_triples(tri)
    R = max((abs(three_sum(u, b)) for b in trip), default=0)
    observed = max(abs(u[p]) for p in tri.sites())
    return float(observed), float(triangle_growth_bound(float(S), float(R), tri.n))


# trapezoid decomposition ---------------------------------------------------------------------

@dataclass(frozen=True)
class Decomposition:
    trapezoid: Trapezoid
    v: Field2
    w: Field2
    K: Number          # max |u| on the upper edge
    R: Number          # max |three-term sum of u| over the sweep set

    def g(self, t: int) -> list[Number]:
        """g_t(s) = (-1)^s w(a - sξ - tη), 0 ≤ s ≤ m + t."""
        a0, a1 = self.trapezoid.a
        return [(-1) ** s * self.w[(a0 - s, a1 - t)] for s in range(self.trapezoid.m + t + 1)]

    def sup_v(self) -> Number:
        return max(abs(x) for x in self.v.values())

    def v_bound(self) -> Number:
        P = self.trapezoid
        return 4 ** (P.ell + P.m) * (self.K + self.R)


def sweep_points(P: Trapezoid) -> list[TriPoint]:
    """Points b of P_{a-η; m, ℓ-1}: where v must match u's three-term sums."""
    a0, a1 = P.a
    return [(s, t) for t in range(a1 - 1, a1 - P.ell - 1, -1)
            for s in range(a0, a0 - P.m + (t - a1), -1)]


def construct_v(u: Mapping[TriPoint, Number], P: Trapezoid) -> Decomposition:
    """v = u on the upper edge, v = 0 on the left leg below it, and v shares
    u's three-term sums on P_{a-η; m, ℓ-1}; w = u - v."""
    a0, a1 = P.a
    v: Field2 = {}
    for j in range(P.m + 1):
        p = (a0 - j, a1)
        v[p] = u[p]
    for t in range(a1 - 1, a1 - P.ell - 1, -1):
        v[(a0, t)] = 0
        lo = a0 - P.m + (t - a1)
        for s in range(a0, lo, -1):
            v[(s - 1, t)] = (-v[(s, t)] - v[(s, t + 1)]
                             + u[(s, t)] + u[(s - 1, t)] + u[(s, t + 1)])
    w = {p: u[p] - v[p] for p in v}
    K = max(abs(u[p]) for p in P.upper_edge())
    R = max((abs(three_sum(u, b)) for b in sweep_points(P)), default=0)
    return Decomposition(P, v, w, K, R)


@dataclass(frozen=True)
class DecompositionReport:
    left_leg_zero: bool
    upper_edge_match: bool
    sums_match: bool
    bound_ok: bool
    w_homogeneous: bool


def check_decomposition(u: Mapping[TriPoint, Number], d: Decomposition) -> DecompositionReport:
    P = d.trapezoid
    a0, a1 = P.a
    leg = all(d.v[(a0, a1 - t)] == 0 for t in range(1, P.ell + 1))
    edge = all(d.v[p] == u[p] for p in P.upper_edge())
    pts = sweep_points(P)
    sums = all(three_sum(d.v, b) == three_sum(u, b) for b in pts)
    hom = all(three_sum(d.w, b) == 0 for b in pts) and all(d.w[p] == 0 for p in P.upper_edge())
    bound = d.sup_v() <= d.v_bound()
    return DecompositionReport(leg, edge, sums, bound, hom)


def finite_difference(values: Sequence[Number], order: int) -> list[Number]:
    vals = list(values)
    for _ in range(order):
        vals = [b - a for a, b in zip(vals, vals[1:])]
    return vals


def polynomial_structure_holds(d: Decomposition) -> bool:
    """Δ^{t+1} g_t ≡ 0 for t = 0..ℓ, checked exactly."""
    return all(all(x == 0 for x in finite_difference(d.g(t), t + 1))
               for t in range(d.trapezoid.ell + 1))


# discrete Remez ---------------------------------------------------------------------

def remez_bound(M: Number, d: int, ell: int, interval_length: Number) -> Number:
    """(4|I|/ℓ)^d · M, exact when the inputs are."""
    if ell < 1:
        raise ValueError("ℓ must be positive")
    if d == 0:
        return M
    return Fraction(4 * interval_length, ell) ** d * M if not isinstance(M, float) else (
        (4.0 * float(interval_length) / ell) ** d * M)


def interpolate_exact(xs: Sequence[int], ys: Sequence[Number]) -> list[Fraction]:
    """Monomial coefficients of the interpolant through the points."""
    n = len(xs)
    A = [[Fraction(x) ** j for j in range(n)] + [Fraction(y)] for x, y in zip(xs, ys)]
    for c in range(n):
        piv = next(r for r in range(c, n) if A[r][c] != 0)
        A[c], A[piv] = A[piv], A[c]
        for r in range(n):
            if r != c and A[r][c] != 0:
                k = A[r][c] / A[c][c]
                A[r] = [x - k * y for x, y in zip(A[r], A[c])]
    return [A[i][n] / A[i][i] for i in range(n)]


def poly_eval(coef: Sequence[Number], x: Number) -> Number:
    acc: Number = 0
    for c in reversed(coef):
        acc = acc * x + c
    return acc


@dataclass(frozen=True)
class RemezCheck:
    sup: Number
    M: Number
    bound: Number

    @property
    def ok(self) -> bool:
        return self.sup <= self.bound


def discrete_remez(samples: Mapping[int, Number], d: int, ell: int, interval: tuple[int, int]) -> RemezCheck:
    """Given p at ≥ d + ℓ integer points of I = [lo, hi], reconstruct p from
    d + 1 of them, confirm the rest fit exactly, and compare sup_I |p| with
    the Remez bound built from M = max |p| over the samples."""
    lo, hi = interval
    xs = sorted(samples)
    if len(xs) < d + ell:
        raise ValueError(f"need at least d + ℓ = {d + ell} points")
    if xs[0] < lo or xs[-1] > hi:
        raise ValueError("sample points must lie in the interval")
    coef = interpolate_exact(xs[:d + 1], [samples[x] for x in xs[:d + 1]])
    for x in xs[d + 1:]:
        if poly_eval(coef, x) != samples[x]:
            raise ValueError(f"samples are not a polynomial of degree ≤ {d}")
    M = max(abs(samples[x]) for x in xs)
    sup = max(abs(poly_eval(coef, x)) for x in range(lo, hi + 1))
    return RemezCheck(sup, M, remez_bound(M, d, ell, hi - lo))


# counting statistics ---------------------------------------------------------------------

@dataclass(frozen=True)
class TriangleStatistic:
    hypothesis_holds: bool
    count: int
    threshold: float
    passed: bool

    @property
    def verdict(self) -> str:
        if not self.hypothesis_holds:
            return "vacuous"
        return "pass" if self.passed else "fail"


def _log_abs(x: Number) -> float:
    if x == 0:
        return -math.inf
    if isinstance(x, int):
        return math.log(abs(x)) if abs(x) < 1 << 1000 else math.log(abs(x) >> 900) + 900 * math.log(2)
    return math.log(abs(float(x))) if not isinstance(x, Fraction) else (
        math.log(abs(x.numerator)) - math.log(x.denominator))


def duc_triangle_statistic(u: Mapping[TriPoint, Number], n: int, C4: float = 6.0,
                           eps1: float = EPS1, origin: TriPoint = (0, 0)) -> TriangleStatistic:
    """Hypothesis |u(a) + u(a-ξ) + u(a+η)| < C4^{-n}|u(0)| on T_{0;⌊n/2⌋};
    statistic #{a ∈ T_{0;n} : |u(a)| > C4^{-n}|u(0)|} against ε1 n²."""
    u0 = u[origin]
    if u0 == 0:
        raise ValueError("u(0) = 0")
    lt = _log_abs(u0) - n * math.log(C4)
    half = Triangle(origin, n // 2)
    hyp = all(_log_abs(three_sum(u, b)) < lt for b in half.sites())
    count = sum(1 for p in Triangle(origin, n).sites() if _log_abs(u[p]) > lt)
    thr = eps1 * n * n
    return TriangleStatistic(hyp, count, thr, count > thr)


@dataclass(frozen=True)
class TrapezoidStatistic:
    hypothesis_holds: bool
    count: int
    level_log: float
    bounds: dict[str, float]

    def verdict(self, key: str) -> str:
        if not self.hypothesis_holds:
            return "vacuous"
        return "pass" if self.count >= self.bounds[key] else "fail"


def trapezoid_statistic(u: Mapping[TriPoint, Number], region: Trapezoid | RevTrapezoid,
                        L: Sequence[TriPoint], C4: float = 6.0, eps2: float = EPS1,
                        eps3: float = EPS1) -> TrapezoidStatistic:
    """Counts sites of the region with |u| ≥ C4^{-2ℓ} min_L |u| and reports
    the lower bounds that apply to this choice of L."""
    if not L:
        raise ValueError("L must be nonempty")
    m, ell = region.m, region.ell
    edge = set(region.upper_edge())
    if not set(L) <= edge:
        raise ValueError("L must lie on the upper edge")
    a0, a1 = region.a
    bounds: dict[str, float] = {}
    offsets = sorted(a0 - p[0] for p in L)
    if isinstance(region, Trapezoid):
        if m < 2 * ell or not all(ell <= t <= m - ell for t in offsets):
            raise ValueError("L outside the admissible anchor range ℓ ≤ t ≤ m - ℓ")
        bounds["square"] = eps2 * (ell + 1) ** 2
        if m >= 2 * ell + 2 and offsets == list(range(ell + 1, m - ell)):
            bounds["strip"] = eps2 * (m + 2) * (ell + 1)
    else:
        if offsets in ([m // 2], [(m + 1) // 2]):
            bounds["square"] = eps3 * (ell + 1) ** 2
        if offsets == list(range(1, m)):
            bounds["strip"] = eps3 * (m + 2) * (ell + 1)
    level = min(_log_abs(u[c]) for c in L) - 2 * ell * math.log(C4)
    hyp = all(_log_abs(three_sum(u, b)) <= level for b in interior_triples(region))
    count = sum(1 for p in region.sites() if _log_abs(u[p]) >= level)
    return TrapezoidStatistic(hyp, count, level, bounds)


def reversed_reduction(region: RevTrapezoid, L: Sequence[TriPoint]) -> Trapezoid:
    """The standard trapezoid inside P^r used to transfer the count."""
    a0, a1 = region.a
    q = region.ell // 5
    offsets = sorted(a0 - p[0] for p in L)
    if len(offsets) == 1:
        ap = (a0 - offsets[0], a1)
        return Trapezoid((ap[0] + q + 1, ap[1]), 2 * q + 2, q)
    return Trapezoid((a0 - (q + 2), a1), region.m - 2 * q - 4, q)


def count_above(u: Mapping[TriPoint, Number], pts: Iterable[TriPoint], level_log: float) -> int:
    return sum(1 for p in pts if _log_abs(u[p]) >= level_log)
