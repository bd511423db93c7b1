"""Integer lattice geometry on Z^3: cubes, cuboids, diagonal planes, cones,
dyadic cubes and a covering selector for defect cubes.

Sites are plain ``tuple[int, int, int]``. Everything here is exact; floats are
never used to decide membership.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import floor
from typing import Iterable, Iterator, Sequence, Union

Site = tuple[int, int, int]
Point = tuple[Fraction, Fraction, Fraction]
Rational = Union[int, Fraction]

E1: Site = (1, 0, 0)
E2: Site = (0, 1, 0)
E3: Site = (0, 0, 1)
UNIT_STEPS: tuple[Site, ...] = (
    (-1, 0, 0), (0, -1, 0), (0, 0, -1), (0, 0, 1), (0, 1, 0), (1, 0, 0),
)

# plane normals lambda_tau, tau = 1..4
LAMBDA: dict[int, Site] = {
    1: (1, 1, 1),
    2: (-1, 1, 1),
    3: (1, -1, 1),
    4: (-1, -1, 1),
}
# face normals of the tetrahedra
LAMBDA_BAR: dict[int, Site] = {
    2: (-1, 1, 1),
    3: (1, -1, 1),
    4: (1, 1, -1),
}


def dot(a: Sequence[Rational], b: Sequence[Rational]) -> Rational:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def add(a: Site, b: Site) -> Site:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def sub(a: Site, b: Site) -> Site:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def scale(k: int, a: Site) -> Site:
    return (k * a[0], k * a[1], k * a[2])


def norm2(a: Sequence[Rational]) -> Rational:
    """Squared Euclidean norm, exact for integer and rational input."""
    return a[0] * a[0] + a[1] * a[1] + a[2] * a[2]


def linf(a: Sequence[Rational]) -> Rational:
    return max(abs(a[0]), abs(a[1]), abs(a[2]))


def l1(a: Sequence[Rational]) -> Rational:
    return abs(a[0]) + abs(a[1]) + abs(a[2])


def axis_vector(tau: int, sign: int = 1) -> Site:
    if tau not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {tau}")
    v = [0, 0, 0]
    v[tau - 1] = sign
    return (v[0], v[1], v[2])


@dataclass(frozen=True)
class Cube:
    """The set ``center + ([-r, r] ∩ Z)^3``."""

    center: Site
    radius: Rational = 0

    def __post_init__(self) -> None:
        if self.radius < 0:
            raise ValueError("cube radius must be nonnegative")

    @property
    def r(self) -> int:
        """Integer half-width actually realized on the lattice."""
        return floor(self.radius)

    @property
    def side(self) -> int:
        return 2 * self.r + 1

    @property
    def size(self) -> int:
        return self.side ** 3

    @property
    def lower(self) -> Site:
        r = self.r
        return (self.center[0] - r, self.center[1] - r, self.center[2] - r)

    @property
    def upper(self) -> Site:
        r = self.r
        return (self.center[0] + r, self.center[1] + r, self.center[2] + r)

    def __contains__(self, b: object) -> bool:
        c, r = self.center, self.radius
        return (abs(b[0] - c[0]) <= r and abs(b[1] - c[1]) <= r  # type: ignore[index]
                and abs(b[2] - c[2]) <= r)  # type: ignore[index]

    def sites(self) -> list[Site]:
        return cube_sites(self)

    def index(self, b: Site) -> int:
        """Position of ``b`` in the lexicographic enumeration."""
        s = self.side
        lo = self.lower
        return ((b[0] - lo[0]) * s + (b[1] - lo[1])) * s + (b[2] - lo[2])

    def shrink(self, k: Rational) -> "Cube":
        return Cube(self.center, self.radius - k)

    def as_cuboid(self) -> "Cuboid":
        return Cuboid(self.lower, self.upper)

    def diameter(self) -> float:
        return 2 * self.r * 3 ** 0.5


def cube_sites(cube: Cube) -> list[Site]:
    """All lattice points of the cube in lexicographic (x, y, z) order."""
    lo, hi = cube.lower, cube.upper
    return [
        (x, y, z)
        for x in range(lo[0], hi[0] + 1)
        for y in range(lo[1], hi[1] + 1)
        for z in range(lo[2], hi[2] + 1)
    ]


@dataclass(frozen=True)
class Cuboid:
    """Axis-aligned box ``[t1, k1] x [t2, k2] x [t3, k3]`` of lattice points."""

    lo: Site
    hi: Site

    def __post_init__(self) -> None:
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"empty cuboid {self.lo}..{self.hi}")

    @property
    def p_plus(self) -> int:
        return self.hi[0]

    @property
    def p_minus(self) -> int:
        return self.lo[0]

    @property
    def q_plus(self) -> int:
        return self.hi[1]

    @property
    def q_minus(self) -> int:
        return self.lo[1]

    def is_even(self) -> bool:
        return all(v % 2 == 0 for v in self.lo + self.hi)

    def __contains__(self, b: object) -> bool:
        return all(l <= c <= h for l, c, h in zip(self.lo, b, self.hi))  # type: ignore[call-overload]

    def contains_cuboid(self, other: "Cuboid") -> bool:
        return all(a <= b for a, b in zip(self.lo, other.lo)) and all(
            a >= b for a, b in zip(self.hi, other.hi))

    def intersects(self, other: "Cuboid") -> bool:
        return all(max(a, b) <= min(c, d)
                   for a, b, c, d in zip(self.lo, other.lo, self.hi, other.hi))

    @staticmethod
    def hull(*boxes: "Cuboid") -> "Cuboid":
        lo = tuple(min(b.lo[i] for b in boxes) for i in range(3))
        hi = tuple(max(b.hi[i] for b in boxes) for i in range(3))
        return Cuboid(lo, hi)  # type: ignore[arg-type]


def even_cuboid_between(inner: Cube, outer: Cube) -> Cuboid:
    """Even cuboid B with inner ⊂ B ⊂ outer; lexicographically least lower
    corner among the candidates, largest upper corner."""
    lo, hi = [], []
    for i in range(3):
        lo_c = [v for v in range(outer.lower[i], inner.lower[i] + 1) if v % 2 == 0]
        hi_c = [v for v in range(inner.upper[i], outer.upper[i] + 1) if v % 2 == 0]
        if not lo_c or not hi_c:
            raise ValueError("no even cuboid fits between the two cubes")
        lo.append(lo_c[0])
        hi.append(hi_c[-1])
    return Cuboid(tuple(lo), tuple(hi))  # type: ignore[arg-type]


# cones -----------------------------------------------------------------------

def cone_membership(a: Site, tau: int, b: Site) -> bool:
    """b ∈ C_a^tau: the tau-offset dominates the other two in l1."""
    d = sub(b, a)
    i = tau - 1
    return abs(d[i]) >= abs(d[(i + 1) % 3]) + abs(d[(i + 2) % 3])


def cone_section(a: Site, tau: int, k: int) -> list[Site]:
    """Sites of C_a^tau with (b - a)·e_tau = k, in lexicographic order."""
    if tau not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {tau}")
    m = abs(k)
    out = []
    for p in range(-m, m + 1):
        w = m - abs(p)
        for q in range(-w, w + 1):
            off = [0, 0, 0]
            off[tau - 1] = k
            others = [j for j in range(3) if j != tau - 1]
            off[others[0]], off[others[1]] = p, q
            out.append(add(a, (off[0], off[1], off[2])))
    return sorted(out)


# diagonal planes ---------------------------------------------------------------

def plane_sites(tau: int, k: int, within: Cube) -> list[Site]:
    """Sites with a·lambda_tau = k inside the cube, lexicographic."""
    lam = LAMBDA[tau]
    lo, hi = within.lower, within.upper
    out = []
    for x in range(lo[0], hi[0] + 1):
        for y in range(lo[1], hi[1] + 1):
            # lam[2] == 1 for every tau
            z = k - lam[0] * x - lam[1] * y
            if lo[2] <= z <= hi[2]:
                out.append((x, y, z))
    return out


def project_lambda1(a: Sequence[Rational], k: Rational) -> Point:
    """Orthogonal projection onto the plane x + y + z = k."""
    shift = Fraction(k - (a[0] + a[1] + a[2]), 3)
    return (a[0] + shift, a[1] + shift, a[2] + shift)


# dyadic cubes -------------------------------------------------------------------

def is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def dyadic_cubes(L: int, region: Cube) -> list[Cube]:
    """Dyadic cubes Q_L(c), c ∈ (L/2)Z^3, whose center lies within l∞
    distance < L/2 of the region; together they cover it."""
    if not is_power_of_two(L) or L < 2:
        raise ValueError(f"L must be a power of two ≥ 2, got {L}")
    h = L // 2
    axes = []
    for i in range(3):
        lo = region.lower[i]
        hi = region.upper[i]
        # multiples j*h with lo - h < j*h < hi + h
        first = (lo - h) // h + 1
        last = -((-(hi + h)) // h) - 1
        axes.append([j * h for j in range(first, last + 1)])
    return [Cube((x, y, z), L) for x in axes[0] for y in axes[1] for z in axes[2]]


# covering selection -------------------------------------------------------------

def _axis_gap(inner: Cuboid, outer: Cuboid, Q: Cuboid) -> int | None:
    """Smallest l∞ gap between ``inner`` and Q \\ outer, None if Q ⊂ outer."""
    gaps = []
    for i in range(3):
        if outer.lo[i] > Q.lo[i]:
            gaps.append(inner.lo[i] - outer.lo[i] + 1)
        if outer.hi[i] < Q.hi[i]:
            gaps.append(outer.hi[i] - inner.hi[i] + 1)
    return min(gaps) if gaps else None


def covering_margin(defect: Cube, cube: Cube, Q: Cube) -> float:
    """Euclidean distance from the defect to Q minus the cube (inf if empty).

    For boxes the nearest outside lattice point differs in one axis only, so
    the distance equals the smallest per-axis gap."""
    g = _axis_gap(defect.as_cuboid(), cube.as_cuboid(), Q.as_cuboid())
    return float("inf") if g is None else float(g)


def _place(box: Cuboid, R: int, m: Fraction, Q: Cuboid) -> Site | None:
    """Center of an R-cube inside Q holding ``box`` with margin ≥ m."""
    center = []
    for i in range(3):
        lo_ok = Q.lo[i] + R
        hi_ok = Q.hi[i] - R
        if lo_ok > hi_ok:
            return None
        want = (box.lo[i] + box.hi[i]) // 2
        feasible = []
        for c in (want, *range(lo_ok, hi_ok + 1)):
            if not lo_ok <= c <= hi_ok:
                continue
            low_face, high_face = c - R, c + R
            if low_face > box.lo[i] or high_face < box.hi[i]:
                continue
            if low_face > Q.lo[i] and box.lo[i] - low_face + 1 < m:
                continue
            if high_face < Q.hi[i] and high_face - box.hi[i] + 1 < m:
                continue
            feasible.append(c)
            break
        if not feasible:
            return None
        center.append(feasible[0])
    return (center[0], center[1], center[2])


def select_covering(
    Q: Cube, defects: Sequence[Cube], alpha: int, L1: int, K: int | None = None
) -> tuple[int, list[Cube]]:
    """Pick a dyadic L3 ∈ [L1, alpha·L1] and disjoint L3-cubes in Q so that
    every defect sits in one of them at distance ≥ L3/8 from Q minus it.

    Cubes are sized as L-cubes ``Q_{L/2}``. Defects are greedily merged into
    clusters; the first L3 (ascending) where all clusters fit wins. Returns
    one cube per cluster, so at most ``K`` cubes.
    """
    if not (is_power_of_two(alpha) and is_power_of_two(L1)):
        raise ValueError("alpha and L1 must be dyadic")
    K = len(defects) if K is None else K
    if len(defects) > K:
        raise ValueError("more defects than K")
    Qbox = Q.as_cuboid()
    for d in defects:
        if not Qbox.contains_cuboid(d.as_cuboid()):
            raise ValueError(f"defect {d} not inside Q")
    L3 = L1
    while L3 <= alpha * L1:
        result = _cluster_cover(Qbox, defects, L3)
        if result is not None:
            return L3, result
        L3 *= 2
    raise ValueError(
        f"no admissible L3 in [{L1}, {alpha * L1}]; alpha too small for this configuration")


def _cluster_cover(Qbox: Cuboid, defects: Sequence[Cube], L3: int) -> list[Cube] | None:
    R = L3 // 2
    m = Fraction(L3, 8)
    clusters = [[i] for i in range(len(defects))]
    while True:
        placed: list[Cube] = []
        for cl in clusters:
            box = Cuboid.hull(*(defects[i].as_cuboid() for i in cl))
            c = _place(box, R, m, Qbox)
            if c is None:
                return None
            placed.append(Cube(c, R))
        merged = False
        for i, j in itertools.combinations(range(len(placed)), 2):
            if placed[i].as_cuboid().intersects(placed[j].as_cuboid()):
                clusters[i] = sorted(clusters[i] + clusters[j])
                del clusters[j]
                merged = True
                break
        if not merged:
            order = sorted(range(len(placed)), key=lambda k: placed[k].center)
            return [placed[k] for k in order]


def iter_box(lo: Site, hi: Site) -> Iterator[Site]:
    return itertools.product(range(lo[0], hi[0] + 1), range(lo[1], hi[1] + 1),
                             range(lo[2], hi[2] + 1))  # type: ignore[return-value]


def site_str(a: Iterable[int]) -> str:
    return ",".join(str(v) for v in a)
