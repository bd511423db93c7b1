"""Regular tetrahedra on the λ-planes, pyramids stacked from truncated
tetrahedra, and the basement finder.

A tetrahedron 𝔗_{a,r} has apex t = a + (r, r, 2r), basement on the plane
c·λ₁ = a·λ₁ and lateral faces c·λ̄_τ = K_τ := t·λ̄_τ. Since λ̄₂ + λ̄₃ + λ̄₄ = λ₁,
a truncated copy with inset F and floor h is nonempty iff h ≤ a·λ₁ + 4r − 3F.
All membership tests are exact: lattice points are scaled to integers.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .duc_engine import GradedSet, is_normal
from .fields_operator import LatticeField
from .lattice_core import LAMBDA, LAMBDA_BAR, Cube, Site, add, dot

L1 = np.array(LAMBDA[1], dtype=np.int64)
LBAR = np.array([LAMBDA_BAR[2], LAMBDA_BAR[3], LAMBDA_BAR[4]], dtype=np.int64)  # rows τ = 2, 3, 4
TAUS = (2, 3, 4)

# perturbation directions for the interior test
DIRS14 = np.array([d for d in np.ndindex(3, 3, 3)], dtype=np.int64) - 1
DIRS14 = DIRS14[(np.abs(DIRS14).sum(axis=1) == 1) | (np.abs(DIRS14).sum(axis=1) == 3)]

OUTSIDE, INTERIOR, BOUNDARY, BASEMENT = "outside", "interior", "boundary", "basement-interior"


@dataclass(frozen=True)
class TetraFrame:
    a: Site
    r: int

    def __post_init__(self) -> None:
        if self.r < 0:
            raise ValueError("r must be nonnegative")

    @property
    def apex(self) -> Site:
        return add(self.a, (self.r, self.r, 2 * self.r))

    @property
    def K(self) -> tuple[int, int, int]:
        t = self.apex
        return tuple(dot(t, LAMBDA_BAR[tau]) for tau in TAUS)  # type: ignore[return-value]

    @property
    def h0(self) -> int:
        return dot(self.a, LAMBDA[1])

    def apex_level(self, F: int) -> int:
        return self.h0 + 4 * self.r - 3 * F

    def contains(self, c: Sequence) -> bool:
        return in_truncated(self, c, self.h0, 0)

    def basement_vertices(self) -> list[Site]:
        return [vertex(self, self.h0, 0, tau) for tau in TAUS]

    def vertices(self) -> list[Site]:
        return self.basement_vertices() + [self.apex]

    def diameter(self) -> float:
        return 2 * math.sqrt(2) * self.r

    def bounding_box(self, margin: int = 0) -> tuple[Site, Site]:
        V = np.array(self.vertices())
        lo = V.min(axis=0) - margin
        hi = V.max(axis=0) + margin
        return tuple(int(x) for x in lo), tuple(int(x) for x in hi)  # type: ignore[return-value]

    def lattice_points(self) -> list[Site]:
        lo, hi = self.bounding_box()
        pts = _box(lo, hi)
        return [tuple(int(x) for x in p) for p in pts[_tetra_mask(self, pts, 1, self.h0, 0)]]

    def ball_intersects(self, centre: Sequence[float], radius: float) -> bool:
        """Open ball meets the closed tetrahedron."""
        return _point_tetra_distance(np.asarray(centre, dtype=float),
                                     np.array(self.vertices(), dtype=float)) < radius


def f_value(frame: TetraFrame, b: Site) -> int:
    """F_{a,r,b} = min_τ (K_τ - b·λ̄_τ)."""
    if not frame.contains(b):
        raise ValueError(f"{b} is outside the tetrahedron")
    return min(k - dot(b, LAMBDA_BAR[tau]) for k, tau in zip(frame.K, TAUS))


def in_truncated(frame: TetraFrame, c: Sequence, h, F) -> bool:
    """c·λ₁ ≥ h and c·λ̄_τ ≤ K_τ - F for every τ (exact for rational c)."""
    c = [Fraction(x) for x in c]
    if dot(c, LAMBDA[1]) < h:
        return False
    return all(dot(c, LAMBDA_BAR[tau]) <= k - F for k, tau in zip(frame.K, TAUS))


def truncated_membership(frame: TetraFrame, b: Site, c: Sequence) -> bool:
    return in_truncated(frame, c, dot(b, LAMBDA[1]), f_value(frame, b))


def vertex(frame: TetraFrame, h: int, F: int, tau: int) -> Site:
    """The point with c·λ₁ = h and c·λ̄_τ' = K_τ' - F for τ' ≠ τ."""
    rows = [LAMBDA[1]] + [LAMBDA_BAR[t] for t in TAUS if t != tau]
    rhs = [h] + [k - F for k, t in zip(frame.K, TAUS) if t != tau]
    sol = _solve3(rows, rhs)
    if any(x.denominator != 1 for x in sol):
        raise ArithmeticError(f"non-integer vertex {sol}")
    return (int(sol[0]), int(sol[1]), int(sol[2]))


def truncated_vertices(frame: TetraFrame, b: Site) -> dict[int, Site]:
    h, F = dot(b, LAMBDA[1]), f_value(frame, b)
    return {tau: vertex(frame, h, F, tau) for tau in TAUS}


def edges_through(frame: TetraFrame, b: Site) -> list[int]:
    """The τ with b on the edge ℒ_{a,r,b,τ} of its own truncated basement."""
    F = f_value(frame, b)
    return [tau for k, tau in zip(frame.K, TAUS) if dot(b, LAMBDA_BAR[tau]) == k - F]


def _solve3(rows, rhs) -> list[Fraction]:
    A = [[Fraction(x) for x in r] + [Fraction(y)] for r, y in zip(rows, rhs)]
    for c in range(3):
        piv = next(i for i in range(c, 3) if A[i][c] != 0)
        A[c], A[piv] = A[piv], A[c]
        for i in range(3):
            if i != c and A[i][c] != 0:
                k = A[i][c] / A[c][c]
                A[i] = [x - k * y for x, y in zip(A[i], A[c])]
    return [A[i][3] / A[i][i] for i in range(3)]


# 𝔥 sets --------------------------------------------------------------------------------

def h_key(frame: TetraFrame, b: Site) -> tuple[int, int]:
    return dot(b, LAMBDA[1]), f_value(frame, b)


def h_full(frame: TetraFrame, key: tuple[int, int]) -> bool:
    """True when the truncated tetrahedron is a single point on its floor,
    so the 𝔥 set is the whole closed half space."""
    h, F = key
    return frame.apex_level(F) <= h


def h_contains(frame: TetraFrame, outer: tuple[int, int], inner: tuple[int, int]) -> bool:
    """𝔥(outer) ⊇ 𝔥(inner) for keys (h, F)."""
    (h1, F1), (h2, _) = outer, inner
    if h1 > h2:
        return False
    return F1 >= inner[1] or frame.apex_level(F1) <= h2


def h_equal(frame: TetraFrame, k1: tuple[int, int], k2: tuple[int, int]) -> bool:
    return h_contains(frame, k1, k2) and h_contains(frame, k2, k1)


# pyramids ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Pyramid:
    frame: TetraFrame
    levels: tuple[tuple[int, int], ...]   # (h_i, F_i), h strictly increasing
    witnesses: tuple[Site, ...]

    def to_json(self) -> dict:
        return {"a": list(self.frame.a), "r": self.frame.r,
                "levels": [list(x) for x in self.levels],
                "witnesses": [list(w) for w in self.witnesses]}


def pyramid_build(frame: TetraFrame, gamma: Iterable[Site]) -> Pyramid:
    a = frame.a
    gamma = sorted(set(tuple(g) for g in gamma))
    if a not in gamma:
        raise ValueError("the basement midpoint must belong to Γ")
    if frame.r == 0:
        return Pyramid(frame, ((frame.h0, 0),), (a,))
    for g in gamma:
        if _open_basement(frame, g):
            raise ValueError(f"{g} lies in the open basement")
    pts = sorted((b for b in gamma if frame.contains(b)), key=lambda b: (b != a, b))
    keys = {b: h_key(frame, b) for b in pts}
    maximal: list[Site] = []
    for b in pts:
        kb = keys[b]
        strictly_inside = any(h_contains(frame, keys[c], kb) and not h_contains(frame, kb, keys[c])
                              for c in pts)
        if strictly_inside:
            continue
        if any(h_equal(frame, keys[c], kb) for c in maximal):
            continue
        maximal.append(b)
    maximal.sort(key=lambda b: (keys[b][0], b != a, b))
    levels = tuple(keys[b] for b in maximal)
    if any(x[0] >= y[0] for x, y in zip(levels, levels[1:])):
        raise AssertionError("maximal levels must have distinct heights")
    return Pyramid(frame, levels, tuple(maximal))


def _open_basement(frame: TetraFrame, c: Sequence) -> bool:
    c = [Fraction(x) for x in c]
    return dot(c, LAMBDA[1]) == frame.h0 and all(
        dot(c, LAMBDA_BAR[tau]) < k for k, tau in zip(frame.K, TAUS))


def _tetra_mask(frame: TetraFrame, X: np.ndarray, S: int, h, F) -> np.ndarray:
    """Membership of the points X / S in the truncated tetrahedron (h, F)."""
    K = np.array(frame.K, dtype=np.int64)
    ok = X @ L1 >= S * h
    return ok & ((X @ LBAR.T) <= S * (K - F)).all(axis=1)


def _pyramid_mask(P: Pyramid, X: np.ndarray, S: int) -> np.ndarray:
    out = np.zeros(len(X), dtype=bool)
    lev = P.levels
    for i, (h, F) in enumerate(lev):
        m = _tetra_mask(P.frame, X, S, h, F)
        if i + 1 < len(lev):
            m &= X @ L1 <= S * lev[i + 1][0]
        out |= m
    return out


def classify_array(P: Pyramid, X: np.ndarray, q: int = 1) -> np.ndarray:
    """Classify the points X / q (X an integer (n, 3) array).

    Interior points are detected by perturbing by 1/(8q) along the 14
    directions ±e_i and (±1, ±1, ±1)."""
    X = np.asarray(X, dtype=np.int64).reshape(-1, 3)
    S = 8 * q
    X8 = 8 * X
    inside = _pyramid_mask(P, X8, S)
    K = np.array(P.frame.K, dtype=np.int64)
    base = (X8 @ L1 == S * P.frame.h0) & ((X8 @ LBAR.T) < S * K).all(axis=1)
    interior = inside.copy()
    for d in DIRS14:
        interior &= _pyramid_mask(P, X8 + d, S)
    out = np.full(len(X), OUTSIDE, dtype=object)
    out[inside] = BOUNDARY
    out[inside & interior] = INTERIOR
    out[inside & base] = BASEMENT
    return out


def pyramid_membership(P: Pyramid, c: Sequence) -> str:
    c = [Fraction(x) for x in c]
    q = math.lcm(*[x.denominator for x in c])
    X = np.array([[int(x * q) for x in c]], dtype=np.int64)
    return str(classify_array(P, X, q)[0])


def _box(lo: Sequence[int], hi: Sequence[int]) -> np.ndarray:
    axes = [np.arange(l, h + 1) for l, h in zip(lo, hi)]
    g = np.meshgrid(*axes, indexing="ij")
    return np.stack([x.ravel() for x in g], axis=1).astype(np.int64)


def boundary_sites(P: Pyramid) -> list[Site]:
    lo, hi = P.frame.bounding_box()
    X = _box(lo, hi)
    lab = classify_array(P, X)
    return [tuple(int(v) for v in x) for x in X[lab == BOUNDARY]]


def gamma_free_inside(P: Pyramid, gamma: Iterable[Site]) -> bool:
    """No Γ point in the interior of the pyramid."""
    G = np.array(list(gamma), dtype=np.int64).reshape(-1, 3)
    return not (classify_array(P, G) == INTERIOR).any()


def project_onto_basement(P: Pyramid, X: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto the plane c·λ₁ = a·λ₁ (floats)."""
    X = np.asarray(X, dtype=float)
    s = (X @ L1 - P.frame.h0) / 3.0
    return X - s[:, None] * L1[None, :]


def bilipschitz_ratios(P: Pyramid, sites: Sequence[Site] | None = None) -> tuple[float, float]:
    """min and max of |π(b₁) - π(b₂)| / |b₁ - b₂| over boundary pairs."""
    B = np.array(boundary_sites(P) if sites is None else sites, dtype=float).reshape(-1, 3)
    if len(B) < 2:
        return 1.0, 1.0
    Pb = project_onto_basement(P, B)
    i, j = np.triu_indices(len(B), 1)
    d = np.linalg.norm(B[i] - B[j], axis=1)
    dp = np.linalg.norm(Pb[i] - Pb[j], axis=1)
    rat = dp / d
    return float(rat.min()), float(rat.max())


# counting statistics ---------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryCount:
    count: int
    count_outside_E: int
    bound: float
    bound_E: float
    hypotheses: dict[str, bool]
    count_in_E: int = 0

    @property
    def verdict(self) -> str:
        if not all(self.hypotheses.values()):
            return "vacuous"
        return "pass" if self.count_outside_E >= self.bound else "fail"


def boundary_count_statistic(u: LatticeField, P: Pyramid, log_g: float, C10: float, n: int,
                             C9: float = 1.0, E: GradedSet | None = None,
                             C9p: float | None = None, origin: Site = (0, 0, 0)) -> BoundaryCount:
    """#{b ∈ ∂𝔓 ∩ ℤ³ : |u(b)| ≥ e^{C₁₀ n} g} against C₉(r² + 1), with the
    hypotheses that can be evaluated from the data reported alongside."""
    fr = P.frame
    r = fr.r
    bs = boundary_sites(P) if r > 0 else [fr.a]
    level = log_g + C10 * n
    top = log_g + 3 * C10 * n

    def lg(b):
        v = abs(u.get(b))
        return math.log(v) if v > 0 else -math.inf

    above = [b for b in bs if lg(b) >= level]
    inE = [b for b in above if E is not None and E.contains(b)]
    Qn = Cube(origin, n)
    hyp = {
        "radius": r < n / 32,
        "a_large": lg(fr.a) >= top and fr.a in Qn.shrink(Fraction(n, 2)),
    }
    small = {off: all(lg(c) < log_g for c in _plane_points_near(fr, off)
                      if _open_triangle(_shift(fr.a, off), r, c) and c in u)
             for off in (-1, 0, 1)}
    hyp["basement_small"] = small[0] and (small[-1] or small[1])
    if E is not None:
        hyp["E_normal"] = is_normal(E, fr, E.eps ** -0.5, E.eps)
    band = [b for b in Qn.sites() if dot(b, LAMBDA[1]) >= fr.h0 and b in u and log_g <= lg(b) <= top]
    hyp["E_covers_band"] = all(E is not None and E.contains(b) for b in band)
    bound = C9 * (r * r + 1)
    bound_E = (C9p if C9p is not None else C9) / 2 * (r * r + 1)
    return BoundaryCount(len(above), len(above) - len(inE), bound, bound_E, hyp, len(inE))


def _shift(a: Site, off: int) -> tuple:
    """a + off·λ₁/3, the point of the plane c·λ₁ = a·λ₁ + off above a."""
    return tuple(Fraction(x) + Fraction(off, 3) for x in a)


def _plane_points_near(frame: TetraFrame, offset: int) -> list[Site]:
    lo, hi = frame.bounding_box(margin=1)
    X = _box(lo, hi)
    X = X[X @ L1 == frame.h0 + offset]
    return [tuple(int(v) for v in x) for x in X]


def _open_triangle(x: Sequence, r: int, c: Sequence) -> bool:
    """c in the relatively open triangle 𝒯̊_{x,r} on the plane through x."""
    x = [Fraction(v) for v in x]
    c = [Fraction(v) for v in c]
    if dot(c, LAMBDA[1]) != dot(x, LAMBDA[1]):
        return False
    K = _triangle_K(x, r)
    return all(dot(c, LAMBDA_BAR[t]) < k for k, t in zip(K, TAUS))


def _triangle_K(x: Sequence, r) -> tuple:
    return (dot(x, LAMBDA_BAR[2]) + 2 * r, dot(x, LAMBDA_BAR[3]) + 2 * r, dot(x, LAMBDA_BAR[4]))


# geometry helpers ---------------------------------------------------------------------

def _point_triangle_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    # closest point on a triangle, by Voronoi regions
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0 and d2 <= 0:
        return float(np.linalg.norm(ap))
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0 and d4 <= d3:
        return float(np.linalg.norm(bp))
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        v = d1 / (d1 - d3)
        return float(np.linalg.norm(p - (a + v * ab)))
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0 and d5 <= d6:
        return float(np.linalg.norm(cp))
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        w = d2 / (d2 - d6)
        return float(np.linalg.norm(p - (a + w * ac)))
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return float(np.linalg.norm(p - (b + w * (c - b))))
    denom = 1.0 / (va + vb + vc)
    v, w = vb * denom, vc * denom
    return float(np.linalg.norm(p - (a + ab * v + ac * w)))


def _point_tetra_distance(p: np.ndarray, V: np.ndarray) -> float:
    if _in_simplex(p, V):
        return 0.0
    faces = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
    return min(_point_triangle_distance(p, V[i], V[j], V[k]) for i, j, k in faces)


def _in_simplex(p: np.ndarray, V: np.ndarray) -> bool:
    T = (V[1:] - V[0]).T
    if abs(np.linalg.det(T)) < 1e-14:
        return False
    lam = np.linalg.solve(T, p - V[0])
    return bool(lam.min() >= -1e-12 and lam.sum() <= 1 + 1e-12)


# basement finder ------------------------------------------------------------------------

@dataclass(frozen=True)
class Basement:
    a: Site
    r: int
    s: int          # level index I(a), 1-based


@dataclass
class BasementResult:
    basements: list[Basement]
    radii: dict[Site, int]
    walk: list[Site]
    path: list[tuple]
    total: int
    overlap_ok: bool
    normal_ok: bool
    small_ok: bool

    n: int = 0

    @property
    def conclusion1(self) -> bool:
        return self.total >= self.n / 100


class BasementError(RuntimeError):
    pass


class _PlaneData:
    """Lattice sites of one plane c·λ₁ = j inside the field's domain."""

    def __init__(self, u: LatticeField, j: int):
        lo, hi = u.domain.lower, u.domain.upper
        X = _box(lo, hi)
        X = X[X @ L1 == j]
        self.X = X
        vals = np.abs(u.values[tuple((X - np.asarray(lo)).T)])
        with np.errstate(divide="ignore"):
            self.logu = np.log(vals)
        self.Y = X @ LBAR.T   # columns: c·λ̄_2, c·λ̄_3, c·λ̄_4


def _entry_radius(Y: np.ndarray, x3: np.ndarray) -> np.ndarray:
    """Smallest integer r with the point in the open triangle 𝒯̊_{x,r},
    from the scaled gaps 3(c - x)·λ̄; inf where the λ̄₄ gap forbids it."""
    d = 3 * Y - x3[None, :]
    m = np.maximum(d[:, 0], d[:, 1])
    # r > m / 6  ⇔  r ≥ floor(m / 6) + 1
    r = np.floor_divide(m, 6) + 1
    r = r.astype(float)
    r[d[:, 2] >= 0] = np.inf
    return r


def find_basements(u: LatticeField, n: int, k: int, a0: Site, log_levels: Sequence[float],
                   D: float, E: GradedSet | None = None, eps: float = 0.1,
                   ball_exponent: float | None = None, unit_radius: float | None = None,
                   origin: Site = (0, 0, 0)) -> BasementResult:
    """Triangles on P_{1,k} escaping from a₀ over the level sets of u.

    ``log_levels`` holds log g_1 < … < log g_M; the cube Q_n is centred at
    ``origin`` and u must be defined on it."""
    O = np.asarray(origin, dtype=np.int64)
    g = np.asarray(log_levels, dtype=float)
    if len(g) < 1:
        raise ValueError("need at least one level")
    if np.any(g[1:] - g[:-1] < D * n - 1e-12):
        raise BasementError("level gaps below e^{Dn}")
    if dot(a0, LAMBDA[1]) != k:
        raise BasementError("a0 is not on the plane P_{1,k}")
    if max(abs(x - o) for x, o in zip(a0, origin)) > n / 4:
        raise BasementError("a0 outside Q_{n/4}")
    if abs(u.get(a0)) <= 0 or math.log(abs(u.get(a0))) <= g[-1]:
        raise BasementError("|u(a0)| must exceed the top level")
    ball_exponent = 1 + 2 * eps / 3 if ball_exponent is None else ball_exponent
    unit_radius = eps ** (-2 / 3) if unit_radius is None else unit_radius
    planes = {j: _PlaneData(u, j) for j in (k, k + 1)}
    half = n / 2
    cap = math.ceil(n / 32) - 1   # the largest integer below n/32
    # R and the level index I(a)
    R: dict[Site, int] = {}
    for j, pd in planes.items():
        inside = (np.abs(pd.X - O) <= half).all(axis=1)
        for x, lu in zip(pd.X[inside], pd.logu[inside]):
            I = int(np.searchsorted(g + D * n, lu, side="right"))
            if I >= 1:
                R[tuple(int(v) for v in x)] = I
    if tuple(a0) not in R:
        raise BasementError("a0 is not in the large-value set")

    def pi_k3(a: Site) -> np.ndarray:
        # 3·π_k(a): shift a point of P_{1,k+1} down by λ₁/3
        a3 = 3 * np.asarray(a, dtype=np.int64)
        if dot(a, LAMBDA[1]) == k + 1:
            a3 = a3 - L1
        return a3

    def radius_of(a: Site) -> int:
        lvl = g[R[a] - 1]
        x3 = pi_k3(a)
        best = cap
        for j in (k, k + 1):
            pd = planes[j]
            xj = x3 + (L1 if j == k + 1 else 0)
            rr = _entry_radius(pd.Y, xj @ LBAR.T)
            viol = pd.logu > lvl
            if viol.any():
                best = min(best, int(min(np.min(rr[viol]), cap + 1)) - 1)
        return max(best, 0)

    radii = {a: radius_of(a) for a in sorted(R)}
    # a single triangle suffices when some radius reaches n/100; a0 is tried first
    for a in [tuple(a0)] + sorted(R):
        if radii[a] >= n / 100:
            b = Basement(a, radii[a], R[a])
            return BasementResult([b], radii, [a], [("T", a)], radii[a] + 1,
                                  True, _normal(E, [b], eps), True, n)

    walk = _escape_walk(planes, R, radii, a0, pi_k3, k)
    a_inf = walk[-1]
    verts = _graph_vertices(R, radii, E, k, pi_k3, ball_exponent, unit_radius)
    path = _least_path(verts, pi_k3(a0), pi_k3(a_inf), k)
    tris = [Basement(v[1], radii[v[1]], R[v[1]]) for v in path if v[0] == "T"]
    # no plane point lies in three of the closed triangles 𝒯_{π_k(a_i), r_i}
    K3 = [_tri_K3(pi_k3(b.a), b.r) for b in tris]
    overlap = all(int(np.minimum(np.minimum(K3[i], K3[j]), K3[l]).sum()) < 3 * k
                  for i in range(len(K3)) for j in range(i + 1, len(K3)) for l in range(j + 1, len(K3)))
    total = sum(b.r + 1 for b in tris)
    return BasementResult(tris, radii, walk, path, total, overlap, _normal(E, tris, eps),
                          _small_check(planes, tris, g, pi_k3, k), n)


def _normal(E: GradedSet | None, tris: Sequence[Basement], eps: float) -> bool:
    if E is None:
        return True
    return all(is_normal(E, TetraFrame(b.a, b.r), eps ** -0.5, eps) for b in tris)


def _small_check(planes, tris, g, pi_k3, k) -> bool:
    """|u| ≤ g_{s_i} on both open triangles of every output basement."""
    for b in tris:
        x3 = pi_k3(b.a)
        for j in (k, k + 1):
            pd = planes[j]
            xj = x3 + (L1 if j == k + 1 else 0)
            rr = _entry_radius(pd.Y, xj @ LBAR.T)
            inside = rr <= b.r
            if (pd.logu[inside] > g[b.s - 1]).any():
                return False
    return True


def _tri_K3(x3: np.ndarray, r: int) -> np.ndarray:
    """3 × face constants of the closed triangle 𝒯_{x,r}."""
    y = x3 @ LBAR.T
    return y + np.array([6 * r, 6 * r, 0])


def _escape_walk(planes, R, radii, a0, pi_k3, k) -> list[Site]:
    walk = [tuple(a0)]
    cur = tuple(a0)
    while True:
        r = radii[cur]
        x3 = pi_k3(cur)
        best = None
        best_val = -math.inf
        for j in (k, k + 1):
            pd = planes[j]
            xj = x3 + (L1 if j == k + 1 else 0)
            rr = _entry_radius(pd.Y, xj @ LBAR.T)
            ring = rr == r + 1
            for x, lu in zip(pd.X[ring], pd.logu[ring]):
                site = tuple(int(v) for v in x)
                if lu > best_val or (lu == best_val and site < best):
                    best, best_val = site, lu
        if best is None:
            raise BasementError("escape walk has no candidates")
        if best not in R:
            return walk
        walk.append(best)
        cur = best
        if len(walk) > 10 * len(R) + 10:
            raise BasementError("escape walk does not terminate")


def _graph_vertices(R, radii, E, k, pi_k3, ball_exponent, unit_radius):
    verts = []
    for a in sorted(R):
        verts.append(("T", a, _tri_K3(pi_k3(a), radii[a] + 1)))
    if E is not None:
        s3 = math.sqrt(3.0)
        for lvl, c, rad in E.balls():
            rho = unit_radius if lvl == 0 else rad ** ball_exponent
            cf = np.asarray(c, dtype=float)
            d = (cf @ L1 - k) / s3
            if abs(d) >= rho:
                continue
            centre = cf - d / s3 * L1
            verts.append(("B", (lvl, tuple(float(x) for x in c)), (centre, math.sqrt(rho * rho - d * d))))
    return verts


def _triangle_vertices3(K3: np.ndarray, k: int) -> np.ndarray:
    """Corners of {c·λ₁ = k, c·λ̄ ≤ K3/3} as float points."""
    mats = []
    for skip in range(3):
        rows = [LAMBDA[1]] + [tuple(LBAR[i]) for i in range(3) if i != skip]
        rhs = [k] + [K3[i] / 3 for i in range(3) if i != skip]
        mats.append(np.linalg.solve(np.array(rows, dtype=float), np.array(rhs, dtype=float)))
    return np.array(mats)


def _contains_point3(v, p3: np.ndarray) -> bool:
    kind, _, data = v
    if kind == "T":
        return bool(((p3 @ LBAR.T) <= data).all())
    centre, rho = data
    return float(np.linalg.norm(p3 / 3.0 - centre)) < rho


def _intersects(v, w, k) -> bool:
    if v[0] == "T" and w[0] == "T":
        return int(np.minimum(v[2], w[2]).sum()) >= 3 * k
    if v[0] == "B" and w[0] == "B":
        (c1, r1), (c2, r2) = v[2], w[2]
        return float(np.linalg.norm(c1 - c2)) < r1 + r2
    t, b = (v, w) if v[0] == "T" else (w, v)
    centre, rho = b[2]
    V = _triangle_vertices3(t[2], k)
    return _point_triangle_distance(centre, V[0], V[1], V[2]) < rho


def _least_path(verts, s3: np.ndarray, t3: np.ndarray, k: int) -> list[tuple]:
    """Uniform-cost search with vertex weights (triangles 2, balls 1)."""
    weight = [2 if v[0] == "T" else 1 for v in verts]
    keys = [(v[0], v[1]) for v in verts]
    n = len(verts)
    adj: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if _intersects(verts[i], verts[j], k):
                adj[i].append(j)
                adj[j].append(i)
    sources = [i for i in range(n) if _contains_point3(verts[i], s3)]
    targets = {i for i in range(n) if _contains_point3(verts[i], t3)}
    if not sources or not targets:
        raise BasementError("endpoints are not covered by any vertex")
    heap = [(weight[i], [keys[i]], [i]) for i in sources]
    heapq.heapify(heap)
    done = set()
    while heap:
        cost, _, path = heapq.heappop(heap)
        i = path[-1]
        if i in done:
            continue
        done.add(i)
        if i in targets:
            return [verts[j][:2] for j in path]
        for j in adj[i]:
            if j not in done:
                heapq.heappush(heap, (cost + weight[j], [keys[x] for x in path] + [keys[j]], path + [j]))
    raise BasementError("endpoints are disconnected in the intersection graph")
