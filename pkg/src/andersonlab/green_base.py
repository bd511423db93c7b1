"""Lattice Green's function of -Δ on ℤ³, the Lifshitz test function and
principal-eigenvalue bounds for R-dense impurity potentials.

G(a) = (2π)^{-3} ∫ cos(k·a) / (6 - 2Σ cos k_j) dk over [-π, π]³.

The integrand is split with a smooth radial cutoff w. The far part
(1 - w)/D is smooth and periodic, so the trapezoid rule on an N³ grid
converges spectrally and one FFT gives every a at once. On the ball the
model w/|k|² is subtracted; its integral is radial and reduces to a 1D
quadrature, while the bounded remainder w(1/D - 1/|k|²) is integrated in
spherical coordinates over one octant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .fields_operator import (
    LatticeField, SolverError, assemble, eig_extremal, laplacian_array, positive_resolvent_columns,
    resolvent_columns, site_hash,
)
from .lattice_core import Cube, Site

WATSON_HALF = 0.252731009858663   # G(0), half of Watson's integral W₃
RHO = 1.2                         # cutoff radius in k-space
MIN_RESOLUTION = 64


def _smooth_step(x: np.ndarray) -> np.ndarray:
    """C^∞ step: 0 for x ≤ 0, 1 for x ≥ 1."""
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def cutoff(q: np.ndarray, rho: float = RHO) -> np.ndarray:
    """w(q): 1 for q ≤ ρ/2, 0 for q ≥ ρ."""
    return _smooth_step((rho - q) / (rho / 2))


def symbol(k: np.ndarray) -> np.ndarray:
    """6 - 2Σ cos k_j along the last axis."""
    return 6.0 - 2.0 * np.cos(k).sum(axis=-1)


@lru_cache(maxsize=4)
def _far_part(N: int, rho: float) -> np.ndarray:
    k = 2 * np.pi * np.fft.fftfreq(N)
    K = np.stack(np.meshgrid(k, k, k, indexing="ij"), axis=-1)
    q = np.linalg.norm(K, axis=-1)
    D = symbol(K)
    vals = np.zeros_like(D)
    mask = q > rho / 2
    vals[mask] = (1.0 - cutoff(q[mask], rho)) / D[mask]
    return np.fft.ifftn(vals).real


@lru_cache(maxsize=4)
def _ball_nodes(nq: int, nt: int, nphi: int, rho: float):
    # octant: θ, φ ∈ [0, π/2], Gauss-Legendre in q, cos θ and φ
    xq, wq = np.polynomial.legendre.leggauss(nq)
    q = 0.5 * rho * (xq + 1)
    wq = 0.5 * rho * wq
    xt, wt = np.polynomial.legendre.leggauss(nt)
    ct = 0.5 * (xt + 1)
    wt = 0.5 * wt
    xp, wp = np.polynomial.legendre.leggauss(nphi)
    ph = 0.25 * np.pi * (xp + 1)
    wp = 0.25 * np.pi * wp
    st = np.sqrt(1 - ct ** 2)
    om = np.stack([
        np.outer(st, np.cos(ph)), np.outer(st, np.sin(ph)), np.outer(ct, np.ones_like(ph))
    ], axis=-1).reshape(-1, 3)
    wom = np.outer(wt, wp).ravel()
    K = (q[:, None, None] * om[None, :, :]).reshape(-1, 3)
    qq = np.repeat(q, len(om))
    D = symbol(K)
    # q² w (1/D - 1/q²) = w (q²/D - 1), bounded and smooth in spherical coordinates
    rem = cutoff(qq, rho) * (qq ** 2 / D - 1.0)
    W = (np.repeat(wq, len(om)) * np.tile(wom, nq) * rem) * 8.0 / (2 * np.pi) ** 3
    return K, W


def _model_part(r: np.ndarray, rho: float, nq: int = 200) -> np.ndarray:
    """(2π)^{-3} ∫ w(|k|) cos(k·a)/|k|² dk = (2π²)^{-1} ∫_0^ρ w(q) sinc(q|a|) dq."""
    xq, wq = np.polynomial.legendre.leggauss(nq)
    q = 0.5 * rho * (xq + 1)
    wq = 0.5 * rho * wq * cutoff(q, rho)
    s = np.sinc(np.outer(r, q) / np.pi)
    return (s @ wq) / (2 * np.pi ** 2)


def _ball_part(A: np.ndarray, rho: float, nq: int, nt: int, nphi: int) -> np.ndarray:
    K, W = _ball_nodes(nq, nt, nphi, rho)
    out = np.empty(len(A))
    for s in range(0, len(A), 64):
        blk = A[s:s + 64].astype(float)
        # cos(k·a) averaged over the octant's reflections is Π cos(k_j a_j)
        c = np.cos(K[:, None, 0] * blk[None, :, 0]) * np.cos(K[:, None, 1] * blk[None, :, 1]) \
            * np.cos(K[:, None, 2] * blk[None, :, 2])
        out[s:s + 64] = W @ c
    return out + _model_part(np.linalg.norm(A, axis=1), rho)


def green_values(sites: np.ndarray, resolution: int = 128, rho: float = RHO,
                 nq: int = 64, nt: int = 48, nphi: int = 48) -> np.ndarray:
    """G at each row of an (n, 3) integer array."""
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"resolution must be at least {MIN_RESOLUTION}")
    A = np.abs(np.asarray(sites, dtype=np.int64).reshape(-1, 3))
    if A.size and A.max() >= resolution // 2:
        raise ValueError("site outside the reliable range of this resolution")
    far = _far_part(resolution, rho)
    return far[A[:, 0], A[:, 1], A[:, 2]] + _ball_part(A, rho, nq, nt, nphi)


def green_function(a: Sequence[int], resolution: int = 128) -> float:
    return float(green_values(np.array([a]), resolution)[0])


def green_bessel(a: Sequence[int]) -> float:
    """Independent evaluation G(a) = ∫_0^∞ Π_j e^{-2t} I_{a_j}(2t) dt."""
    nu = [abs(int(x)) for x in a]
    f = lambda t: float(np.prod([special.ive(v, 2 * t) for v in nu]))
    T = 2000.0 * (1 + sum(v * v for v in nu))
    brk = [0.0] + [x for x in (1.0, 10.0, 100.0, 1000.0, 1e4, 1e5, 1e6) if x < T] + [T]
    total = 0.0
    for lo, hi in zip(brk, brk[1:]):
        val, _ = integrate.quad(f, lo, hi, limit=400, epsabs=1e-15, epsrel=1e-13)
        total += val
    s = sum(4 * v * v - 1 for v in nu) / 16.0
    tail = (4 * np.pi) ** -1.5 * (2 * T ** -0.5 - (2.0 / 3.0) * s * T ** -1.5)
    return total + tail


# tables ---------------------------------------------------------------------------------

def fundamental_domain(cap: int) -> np.ndarray:
    """Sites 0 ≤ x ≤ y ≤ z ≤ cap."""
    pts = [(x, y, z) for z in range(cap + 1) for y in range(z + 1) for x in range(y + 1)]
    return np.array(pts, dtype=np.int64)


@dataclass
class GreenTable:
    cap: int
    resolution: int
    values: dict[Site, float] = field(repr=False)

    def __call__(self, a: Sequence[int]) -> float:
        key = tuple(sorted(abs(int(x)) for x in a))
        if key[2] > self.cap:
            raise KeyError(f"{tuple(a)} beyond the table cap {self.cap}")
        return self.values[key]   # type: ignore[index]

    def on_cube(self, cube: Cube) -> LatticeField:
        A = np.sort(np.abs(np.asarray(cube.sites(), dtype=np.int64)), axis=1)
        vals = np.array([self.values[(int(x), int(y), int(z))] for x, y, z in A])
        return LatticeField.from_vector(cube, vals)

    def rows(self) -> list[str]:
        return [f"{x} {y} {z} {v!r}" for (x, y, z), v in sorted(self.values.items())]

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(f"# green table v1 cap={self.cap} resolution={self.resolution}\n")
            fh.write("\n".join(self.rows()) + "\n")

    @classmethod
    def load(cls, path: str) -> "GreenTable":
        with open(path) as fh:
            head = fh.readline().split()
            meta = dict(x.split("=") for x in head if "=" in x)
            vals = {}
            for line in fh:
                x, y, z, v = line.split()
                vals[(int(x), int(y), int(z))] = float(v)
        return cls(int(meta["cap"]), int(meta["resolution"]), vals)


def green_table(cap: int, resolution: int = 128) -> GreenTable:
    if 2 * cap + 2 > resolution:
        raise ValueError("resolution too coarse for this cap")
    F = fundamental_domain(cap)
    vals = green_values(F, resolution)
    return GreenTable(cap, resolution, {tuple(int(v) for v in p): float(g) for p, g in zip(F, vals)})


def neg_laplacian_G(table: GreenTable, a: Site) -> float:
    x, y, z = a
    nb = [(x + 1, y, z), (x - 1, y, z), (x, y + 1, z), (x, y - 1, z), (x, y, z + 1), (x, y, z - 1)]
    return 6 * table(a) - sum(table(b) for b in nb)


def fit_far_constant(table: GreenTable, rmin: float, rmax: float) -> tuple[float, float]:
    """(mean, relative spread) of G(a)|a| over rmin ≤ |a| ≤ rmax."""
    vals = [g * math.sqrt(sum(c * c for c in a)) for a, g in table.values.items()
            if rmin <= math.sqrt(sum(c * c for c in a)) <= rmax]
    arr = np.array(vals)
    return float(arr.mean()), float((arr.max() - arr.min()) / arr.mean())


# Lifshitz test function ---------------------------------------------------------------------

@dataclass(frozen=True)
class LifshitzFunctions:
    u: LatticeField
    u0: LatticeField
    R: float
    eps_d: float
    residual: float
    positive: bool
    bounds_ok: bool


def lifshitz_u(table: GreenTable, domain: Cube, R: float, eps_d: float) -> LatticeField:
    """u(a) = 1 + G(0) - G(a) - ε R^{-3}|a|²."""
    X = np.asarray(domain.sites(), dtype=float)
    G = table.on_cube(domain).vector()
    vals = 1.0 + table((0, 0, 0)) - G - eps_d * R ** -3 * (X ** 2).sum(axis=1)
    return LatticeField.from_vector(domain, vals)


def lifshitz_test_function(table: GreenTable, R: float, eps_d: float, domain: Cube,
                           impurities: LatticeField) -> LifshitzFunctions:
    """u and u₀(a) = min_{|a-b| < 3R, V̄(b) = 1} u(a - b) on ``domain``.

    ``impurities`` must cover the domain enlarged by 3R; the table must
    reach 3R + 1 for u's Laplacian."""
    reach = math.ceil(3 * R)
    ucube = Cube((0, 0, 0), max(reach, domain.r + 1))
    u = lifshitz_u(table, ucube, R, eps_d)
    # Δu against the closed form -Δu = -δ₀ + 6ε R^{-3}
    lap = laplacian_array(u, Cube((0, 0, 0), ucube.r - 1))
    target = np.full(lap.shape, -6 * eps_d * R ** -3)
    c = ucube.r - 1
    target[c, c, c] += 1.0
    residual = float(np.max(np.abs(lap - target)))
    # u₀ as a minimum over impurity sites b, vectorized over a
    positive = bool(np.all(u.values[_ball_mask(ucube, 3 * R)] > 0))
    if not positive:
        raise ValueError("u is not positive on |a| < 3R; R too small for ε_d")
    A = np.asarray(domain.sites(), dtype=np.int64)
    vals = np.full(len(A), np.inf)
    c = np.asarray(ucube.center)
    imp = [b for b, v in zip(impurities.domain.sites(), impurities.vector()) if v == 1]
    for b in imp:
        D = A - np.asarray(b)
        near = (D * D).sum(axis=1) < 9 * R * R
        if near.any():
            idx = D[near] - c + ucube.r
            vals[near] = np.minimum(vals[near], u.values[idx[:, 0], idx[:, 1], idx[:, 2]])
    if not np.isfinite(vals).all():
        raise ValueError("some site has no impurity within distance 3R")
    u0 = LatticeField.from_vector(domain, vals)
    g0 = table((0, 0, 0))
    bounds_ok = bool((vals > 0).all() and (vals <= 1 + g0 + 1e-12).all())
    return LifshitzFunctions(u, u0, R, eps_d, residual, positive, bounds_ok)


def _ball_mask(cube: Cube, radius: float) -> np.ndarray:
    """Sites of a cube centred at 0 with |a| < radius, as a boolean array."""
    r = np.arange(-cube.r, cube.r + 1)
    x, y, z = np.meshgrid(r, r, r, indexing="ij")
    return x * x + y * y + z * z < radius * radius


def min_max_check(u: LatticeField, R: float) -> tuple[float, float]:
    """(min over 2R < |a| < 3R, max over |a| < R) of u."""
    inner, outer = -np.inf, np.inf
    for a in u.domain.sites():
        r2 = a[0] ** 2 + a[1] ** 2 + a[2] ** 2
        if r2 < R * R:
            inner = max(inner, u[a])
        elif 4 * R * R < r2 < 9 * R * R:
            outer = min(outer, u[a])
    return float(outer), float(inner)


# principal eigenvalue ---------------------------------------------------------------------

@dataclass(frozen=True)
class PrincipalBounds:
    n: int
    R: float
    lam0: float
    rayleigh: float
    upper_bound: float

    @property
    def scaled(self) -> float:
        return self.lam0 * self.R ** 3

    @property
    def ok(self) -> bool:
        return self.lam0 <= self.rayleigh + 1e-9 and self.lam0 <= self.upper_bound


def impurity_density_ok(Vbar: LatticeField, Q: Cube, R: float) -> bool:
    """Every site of Q is within distance R of an impurity site of V̄."""
    from scipy.spatial import cKDTree

    imp = np.array([s for s, v in zip(Vbar.domain.sites(), Vbar.vector()) if v == 1], dtype=float)
    if len(imp) == 0:
        return False
    d, _ = cKDTree(imp).query(np.asarray(Q.sites(), dtype=float))
    return bool((d <= R).all())


def principal_eigenvalue_bounds(Q: Cube, Vbar: LatticeField, R: float, seed: int = 0) -> PrincipalBounds:
    if not impurity_density_ok(Vbar, Q, R):
        raise ValueError("impurities are not R-dense in the cube")
    H = assemble(Q, Vbar)
    w, _ = eig_extremal(H, 1, "smallest", seed=seed)
    phi = 1.0 - Vbar.restrict(Q).vector()
    ray = float(phi @ (H.matrix @ phi) / (phi @ phi)) if phi.any() else math.inf
    bound = 24.0 * R ** -3 + 12.0 / Q.r
    lam0 = float(w[0])
    if lam0 > ray + 1e-9:
        raise AssertionError("variational principle violated")
    return PrincipalBounds(Q.r, R, lam0, ray, bound)


# base-case probe --------------------------------------------------------------------------

@dataclass(frozen=True)
class BaseCaseTrial:
    trial: int
    fills: tuple[str, ...]
    norm: float
    norm_bound: float
    worst_entry_margin: float   # max over sampled entries of log|G| - log bound
    passed: bool


def grid_potential(Q: Cube, seed: int, trial: int, spacing: int, fill: str | int) -> LatticeField:
    """Bernoulli values on spacing·ℤ³ and the given fill elsewhere."""
    X = np.asarray(Q.sites(), dtype=np.int64)
    h = site_hash(seed * 1_000_003 + trial, X[:, 0], X[:, 1], X[:, 2])
    bern = (h >> np.uint64(11)).astype(np.float64) * 2.0 ** -53 < 0.5
    on = (X % spacing == 0).all(axis=1)
    if fill == "zeros":
        other = np.zeros(len(X))
    elif fill == "ones":
        other = np.ones(len(X))
    else:
        rng = np.random.default_rng([seed, trial, int(fill)])
        other = (rng.random(len(X)) < 0.5).astype(float)
    vals = np.where(on, bern.astype(float), other)
    return LatticeField.from_vector(Q, vals)


def base_case_trial(n: int, delta: float, eps: float, lam: float, seed: int, trial: int,
                    columns: int = 8, random_fills: int = 8) -> BaseCaseTrial:
    Q = Cube((0, 0, 0), n)
    spacing = math.ceil(1 / eps)
    fills: list[str | int] = ["zeros", "ones"] + list(range(random_fills))
    if spacing == 1:
        fills = ["zeros"]   # no off-grid sites: every fill gives the same V
    norm_bound = math.exp(n ** (2 * delta))
    worst_norm, worst = 0.0, -math.inf
    names = []
    for fl in fills:
        V = grid_potential(Q, seed, trial, spacing, fl)
        H = assemble(Q, V)
        w, vec = eig_extremal(H, 1, "smallest", seed=seed + trial, tol=1e-6)
        if lam >= w[0]:
            raise ValueError("λ must lie below the spectrum")
        worst_norm = max(worst_norm, 1.0 / (w[0] - lam))
        sites = np.asarray(Q.sites(), dtype=np.int64)
        peak = int(np.argmax(np.abs(vec[:, 0])))
        # the ground-state peak is where off-diagonal decay is weakest
        stride = max(1, H.dim // max(columns - 1, 1))
        cols = [peak] + [j for j in range(0, H.dim, stride) if j != peak][:columns - 1]
        targets = [tuple(int(x) for x in sites[j]) for j in cols]
        try:
            # entrywise-accurate columns: far entries are compared against tiny bounds
            G = positive_resolvent_columns(H, lam, targets)
        except SolverError:
            G = np.abs(resolvent_columns(H, lam, targets))
        d = np.linalg.norm(sites[:, None, :] - sites[None, cols, :], axis=-1)
        with np.errstate(divide="ignore"):
            margin = np.log(G) - (2 * delta * math.log(n) - n ** (-delta) * d)
        worst = max(worst, float(margin.max()))
        names.append(str(fl))
    passed = bool(worst_norm <= norm_bound and worst <= 0)
    return BaseCaseTrial(trial, tuple(names), float(worst_norm), norm_bound, worst, passed)


@dataclass(frozen=True)
class BaseCaseSummary:
    n: int
    trials: tuple[BaseCaseTrial, ...]
    failures: int
    frequency: float
    ci: tuple[float, float]

    @property
    def consistent(self) -> bool:
        """Failure frequency compatible with at most 1/n."""
        return self.ci[0] <= 1.0 / self.n


def base_case_probe(n: int, delta: float, eps: float, lam: float, trials: int, seed: int,
                    columns: int = 8) -> BaseCaseSummary:
    if not 0 < delta < 0.1:
        raise ValueError("δ must lie in (0, 1/10)")
    if eps <= 0:
        raise ValueError("ε must be positive")
    from .probes import binomial_interval

    recs = tuple(base_case_trial(n, delta, eps, lam, seed, t, columns) for t in range(trials))
    fails = sum(not r.passed for r in recs)
    return BaseCaseSummary(n, recs, fails, fails / trials, binomial_interval(fails, trials))
