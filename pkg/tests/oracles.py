"""Independent reference implementations used by the tests.

Nothing here calls into the classification code it checks; only frame
constants (apex, face offsets, normals) are shared."""

import itertools

import numpy as np

L1 = np.array([1, 1, 1], dtype=float)
LBAR = np.array([[-1, 1, 1], [1, -1, 1], [1, 1, -1]], dtype=float)

_rng = np.random.default_rng(0)
_G = np.array([d for d in itertools.product(range(-2, 3), repeat=3) if any(d)], dtype=float)
DIRS = np.vstack([_G / np.linalg.norm(_G, axis=1)[:, None], _rng.normal(size=(300, 3))])
DIRS /= np.linalg.norm(DIRS, axis=1)[:, None]
DELTA = 0.05


def tetra_K(a, r):
    apex = np.asarray(a, dtype=float) + np.array([r, r, 2 * r])
    return LBAR @ apex


def h_key(a, r, b):
    """(b·λ₁, F) with F = min_τ (K_τ - b·λ̄_τ)."""
    K = tetra_K(a, r)
    b = np.asarray(b, dtype=float)
    return float(b @ L1), float(np.min(K - LBAR @ b))


def h_set(X, K, key):
    h, F = key
    return (X @ L1 >= h) & ((X @ LBAR.T) >= K - F).any(axis=1)


def open_pyramid(X, a, r, keys):
    """Open tetrahedron minus the union of the closed 𝔥 sets of every Γ point."""
    K = tetra_K(a, r)
    h0 = float(np.asarray(a, dtype=float) @ L1)
    m = (X @ L1 > h0) & ((X @ LBAR.T) < K).all(axis=1)
    for k in keys:
        m &= ~h_set(X, K, k)
    return m


def classify(a, r, gamma, X):
    """Label lattice points by sampling a small sphere around each one."""
    keys = [h_key(a, r, b) for b in gamma]
    X = np.asarray(X, dtype=float)
    S = (X[:, None, :] + DELTA * DIRS[None, :, :]).reshape(-1, 3)
    near = open_pyramid(S, a, r, keys).reshape(len(X), -1)
    at = open_pyramid(X, a, r, keys)
    closure = near.any(axis=1) | at
    interior = near.all(axis=1) & at
    K = tetra_K(a, r)
    h0 = float(np.asarray(a, dtype=float) @ L1)
    base = (X @ L1 == h0) & ((X @ LBAR.T) < K).all(axis=1)
    if r == 0:
        # degenerate frame: the tetrahedron is the point a, its own boundary
        closure = closure | (X == np.asarray(a, dtype=float)).all(axis=1)
    lab = np.full(len(X), "outside", dtype=object)
    lab[closure] = "boundary"
    lab[interior] = "interior"
    lab[closure & base] = "basement-interior"
    return lab


class CachedClassifier:
    """The same labelling as ``classify`` for many Γ on one box. Each 𝔥 set
    is evaluated once on the sphere samples; labels are cached by key set."""

    def __init__(self, a, r, X):
        self.a, self.r = a, r
        self.X = np.asarray(X, dtype=float)
        self.S = (self.X[:, None, :] + DELTA * DIRS[None, :, :]).reshape(-1, 3)
        self.K = tetra_K(a, r)
        self._empty = open_pyramid(self.S, a, r, []), open_pyramid(self.X, a, r, [])
        h0 = float(np.asarray(a, dtype=float) @ L1)
        self.base = (self.X @ L1 == h0) & ((self.X @ LBAR.T) < self.K).all(axis=1)
        self._masks = {}
        self._labels = {}

    def _mask(self, key):
        if key not in self._masks:
            self._masks[key] = ~h_set(self.S, self.K, key), ~h_set(self.X, self.K, key)
        return self._masks[key]

    def __call__(self, gamma):
        keys = frozenset(h_key(self.a, self.r, b) for b in gamma)
        if keys not in self._labels:
            near, at = self._empty[0].copy(), self._empty[1].copy()
            for k in keys:
                mn, ma = self._mask(k)
                near &= mn
                at &= ma
            near = near.reshape(len(self.X), -1)
            closure = near.any(axis=1) | at
            if self.r == 0:
                closure |= (self.X == np.asarray(self.a, dtype=float)).all(axis=1)
            interior = near.all(axis=1) & at
            lab = np.full(len(self.X), "outside", dtype=object)
            lab[closure] = "boundary"
            lab[interior] = "interior"
            lab[closure & self.base] = "basement-interior"
            self._labels[keys] = lab
        return self._labels[keys]


def in_closed_tetra(a, r, c):
    c = np.asarray(c, dtype=float)
    h0 = float(np.asarray(a, dtype=float) @ L1)
    return c @ L1 >= h0 and bool(np.all(LBAR @ c <= tetra_K(a, r)))


def open_basement(a, r, c):
    c = np.asarray(c, dtype=float)
    h0 = float(np.asarray(a, dtype=float) @ L1)
    return c @ L1 == h0 and bool(np.all(LBAR @ c < tetra_K(a, r)))


def bessel_green(a):
    """G(a) = ∫₀^∞ Π_j e^{-2t} I_{a_j}(2t) dt, split at t = 1 and quadrature
    on u = 1/√t beyond, where the integrand decays like t^{-3/2}."""
    from scipy import integrate, special

    def f(t):
        return np.prod([special.ive(abs(x), 2 * t) for x in a])

    head, _ = integrate.quad(f, 0, 1, epsabs=1e-14, epsrel=1e-13, limit=200)
    # t = u^{-2}, dt = -2u^{-3} du
    tail, _ = integrate.quad(lambda u: 2 * f(u ** -2.0) / u ** 3, 0, 1, epsabs=1e-14,
                             epsrel=1e-13, limit=400)
    return head + tail
