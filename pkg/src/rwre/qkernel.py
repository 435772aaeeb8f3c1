"""Exact quenched transition densities, their tilted form and the density fields.

Densities are stored compactly: at lattice time t the walk sits on
y = 2j - t for j = 0..t, and index j is what the arrays hold.  A +1 step maps
j to j + 1 and a -1 step keeps j.

The tilted density is W(t, y) = C P(t, y) with
log C = lambda y - t log cosh(lambda), lambda = N^{-1/4}; it obeys
W(t+1, y) = 2 rho w_{t,y-1} W(t, y-1) + 2 (1 - rho)(1 - w_{t,y+1}) W(t, y+1)
with rho = rho(N), so every update factor is at most 2.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import rng
from .env import rho, seed_u64
from .testfn import SpaceTimeGaussian, TestFunction  # noqa: F401  (re-exported)


def log_cosh(lam):
    """log cosh(lam), accurate for small lam."""
    lam = abs(lam)
    if lam < 1.0:
        return math.log1p(2.0 * math.sinh(0.5 * lam) ** 2)
    return lam + math.log1p(math.exp(-2.0 * lam)) - math.log(2.0)


def constant_logC(N, t, x):
    """log C_{N,t,x} = N^{1/4} x + (N^{1/2} - N log cosh N^{-1/4}) t."""
    lam = float(N) ** -0.25
    return x / lam + (math.sqrt(N) - N * log_cosh(lam)) * t


@dataclass
class QuenchedDensity:
    """P(t, y) on the sites y = 2j - t, j = 0..t."""

    t: int
    P: np.ndarray

    @property
    def y(self):
        return 2 * np.arange(self.t + 1) - self.t

    @property
    def offset(self):
        return -self.t

    def full(self):
        """Values on every integer y in [-t, t], zero off parity."""
        out = np.zeros(2 * self.t + 1)
        out[::2] = self.P
        return out


@dataclass
class TiltedDensity:
    """W(t, y) = C P(t, y) on the sites y = 2j - t, j = 0..t."""

    t: int
    N: int
    W: np.ndarray

    @property
    def y(self):
        return 2 * np.arange(self.t + 1) - self.t

    def full(self):
        out = np.zeros(2 * self.t + 1)
        out[::2] = self.W
        return out


@njit(cache=True)
def row_weights(seed, kind, par, shift, t):
    """Weights w(t, 2j - t) for j = 0..t."""
    rk = rng.row_key(rng.seed_key(seed), t)
    out = np.empty(t + 1)
    for j in range(t + 1):
        out[j] = rng.weight_from_uniform(kind, par, shift, rng.site_uniform(rk, 2 * j - t))
    return out


@njit(cache=True)
def _rows(seed, kind, par, shift, T, up, down):
    """Triangular table of DP rows; the update is out[j+1] += up w P[j],
    out[j] += down (1 - w) P[j].  up = down = 1 gives the raw density."""
    tab = np.zeros((T + 1, T + 1))
    tab[0, 0] = 1.0
    skey = rng.seed_key(seed)
    for t in range(T):
        rk = rng.row_key(skey, t)
        for j in range(t + 1):
            p = tab[t, j]
            if p == 0.0:
                continue
            w = rng.weight_from_uniform(kind, par, shift, rng.site_uniform(rk, 2 * j - t))
            tab[t + 1, j + 1] += up * w * p
            tab[t + 1, j] += down * (1.0 - w) * p
    return tab


@njit(cache=True)
def _mass_defects(seed, kind, par, shift, T):
    """max_t |sum_y P(t, y) - 1| and the number of negative entries, streaming."""
    cur = np.zeros(T + 1)
    nxt = np.zeros(T + 1)
    cur[0] = 1.0
    worst = 0.0
    neg = 0
    skey = rng.seed_key(seed)
    for t in range(T):
        rk = rng.row_key(skey, t)
        for j in range(t + 2):
            nxt[j] = 0.0
        for j in range(t + 1):
            p = cur[j]
            if p == 0.0:
                continue
            w = rng.weight_from_uniform(kind, par, shift, rng.site_uniform(rk, 2 * j - t))
            nxt[j + 1] += w * p
            nxt[j] += (1.0 - w) * p
        s = 0.0
        for j in range(t + 2):
            s += nxt[j]
            if nxt[j] < 0.0:
                neg += 1
        worst = max(worst, abs(s - 1.0))
        cur, nxt = nxt, cur
    return worst, neg


def _env_args(env):
    s = env.spec
    return seed_u64(env.seed), s.code, float(s.param), float(s.shift)


def evolve_density(env, T):
    """Exact quenched densities P(t, .) for t = 0..T."""
    if T < 0:
        raise ValueError("T must be >= 0")
    tab = _rows(*_env_args(env), int(T), 1.0, 1.0)
    return [QuenchedDensity(t, tab[t, :t + 1].copy()) for t in range(T + 1)]


def mass_defect(env, T):
    """Largest deviation of the total mass from 1 over t <= T, and negative count."""
    return _mass_defects(*_env_args(env), int(T))


def evolve_tilted(env, N, T=None):
    """Tilted densities W(t, .) for t = 0..T (default T = N)."""
    T = int(N if T is None else T)
    r = rho(N)
    tab = _rows(*_env_args(env), T, 2.0 * r, 2.0 * (1.0 - r))
    return [TiltedDensity(t, int(N), tab[t, :t + 1].copy()) for t in range(T + 1)]


def log_tilt(N, t, y):
    """log C at lattice time t and integer site y: lambda y - t log cosh(lambda)."""
    lam = float(N) ** -0.25
    return lam * np.asarray(y, dtype=float) - t * log_cosh(lam)


def _pair_at(tilted, N, r, phi):
    W = tilted[r].W
    u = (tilted[r].y - float(N) ** -0.25 * r) / math.sqrt(N)
    return float(np.dot(W, phi(u)))


def pair_density_field(tilted, N, t, phi):
    """U_N(t, phi) = sum_y W(Nt, y) phi(N^{-1/2}(y - N^{3/4} t)).

    ``tilted`` is the sequence from ``evolve_tilted``.  Off the grid N^{-1} Z
    the pairing is linearly interpolated in t.
    """
    s = t * N
    r0 = int(math.floor(s + 1e-9))
    frac = s - r0
    if frac < 1e-9:
        return _pair_at(tilted, N, r0, phi)
    return (1.0 - frac) * _pair_at(tilted, N, r0, phi) + frac * _pair_at(tilted, N, r0 + 1, phi)


def tail_field(tilted, N, t, x):
    """Quenched tail field F_N(t, x) = N^{1/4} C_{N,t,x} P(R(Nt) >= N^{3/4} t + N^{1/2} x).

    Computed from W with factors exp(N^{1/4} x - N^{-1/4}(y - N^{3/4} t)) <= 1.
    """
    r = int(round(t * N))
    lam = float(N) ** -0.25
    d = tilted[r]
    thresh = lam * r + math.sqrt(N) * x
    y = d.y
    sel = y >= thresh - 1e-9
    if not np.any(sel):
        return 0.0
    expo = x / lam - lam * (y[sel] - lam * r)
    return float(np.sum(d.W[sel] * np.exp(expo))) / lam


def tail_probabilities(P):
    """Upper tails sum_{z >= y} P(z) along the compact index (summed from the top)."""
    return np.cumsum(P[::-1])[::-1]


def density_table(env, N, T):
    """Rows (t, y, P, W) for CSV export."""
    raw = evolve_density(env, T)
    til = evolve_tilted(env, N, T)
    rows = []
    for d, w in zip(raw, til):
        for y, p, ww in zip(d.y, d.P, w.W):
            rows.append((d.t, int(y), float(p), float(ww)))
    return rows
