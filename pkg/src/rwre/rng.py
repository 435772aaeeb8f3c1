"""Counter-based hashing and inverse-CDF weight sampling.

Every random weight in the package is a pure function of a 64-bit seed and
integer coordinates, so the DP, the k-point simulators and the Monte Carlo
kernels all consult the identical environment regardless of visiting order
or thread layout.
"""

import math

import numpy as np
from numba import njit

KIND_DEGENERATE = 0
KIND_TWO_POINT = 1
KIND_BETA = 2
KIND_BERNOULLI = 3

_G0 = np.uint64(0x9E3779B97F4A7C15)
_G1 = np.uint64(0xD1B54A32D192ED03)
_G2 = np.uint64(0x8CB92BA72F3D8DD7)
_G3 = np.uint64(0xABC98388FB8FAC03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def mix64(z):
    """splitmix64 finalizer (a bijection of uint64)."""
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, inline="always")
def seed_key(seed):
    return mix64(np.uint64(seed) + _G0)


@njit(cache=True, inline="always")
def row_key(skey, t):
    return mix64(skey ^ (np.uint64(t) * _G1 + _G2))


@njit(cache=True, inline="always")
def site_uniform(rkey, x):
    """Uniform in (0, 1) from a row key and a signed site index."""
    h = mix64(rkey ^ (np.uint64(np.int64(x)) * _G3 + _G0))
    return (np.float64(h >> _S11) + 0.5) * _INV53


@njit(cache=True)
def uniform(seed, t, x):
    return site_uniform(row_key(seed_key(seed), t), x)


@njit(cache=True)
def replica_seed(base, i):
    """Seed of replica ``i`` derived from a base seed."""
    return mix64(mix64(np.uint64(base) + _G0) + np.uint64(i) * _G2)


# ---------------------------------------------------------------------------
# regularized incomplete beta and its inverse (symmetric Beta(a, a) only)


@njit(cache=True)
def _betacf(a, b, x):
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 500):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        dl = d * c
        h *= dl
        if abs(dl - 1.0) < 1e-16:
            break
    return h


@njit(cache=True)
def betainc_reg(a, b, x):
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    lbt = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
           + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(lbt) * _betacf(a, b, x) / a
    return 1.0 - math.exp(lbt) * _betacf(b, a, 1.0 - x) / b


@njit(cache=True)
def beta_ppf_sym(alpha, u):
    """Quantile of Beta(alpha, alpha) at level u, to about 1e-12."""
    if alpha == 1.0:
        return u
    # work in the lower half and reflect, using the symmetry of the law
    flip = u > 0.5
    v = 1.0 - u if flip else u
    lo = 0.0
    hi = 0.5
    x = 0.25
    lnorm = math.lgamma(2.0 * alpha) - 2.0 * math.lgamma(alpha)
    for _ in range(200):
        f = betainc_reg(alpha, alpha, x) - v
        if f > 0.0:
            hi = x
        else:
            lo = x
        dens = math.exp(lnorm + (alpha - 1.0) * (math.log(x) + math.log1p(-x)))
        xn = x - f / dens if dens > 0.0 else 0.5 * (lo + hi)
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) < 1e-13 or hi - lo < 1e-13:
            x = xn
            break
        x = xn
    return 1.0 - x if flip else x


@njit(cache=True, inline="always")
def weight_from_uniform(kind, par, shift, u):
    """Inverse CDF of the (possibly shifted and clipped) weight law."""
    if kind == KIND_DEGENERATE:
        w = 0.5
    elif kind == KIND_TWO_POINT:
        w = 0.5 - par if u < 0.5 else 0.5 + par
    elif kind == KIND_BETA:
        w = beta_ppf_sym(par, u)
    else:
        w = 0.0 if u < 0.5 else 1.0
    if shift != 0.0:
        w = min(1.0, w + shift)
    return w


@njit(cache=True)
def weight_at(seed, kind, par, shift, t, x):
    return weight_from_uniform(kind, par, shift, uniform(seed, t, x))


@njit(cache=True)
def weight_grid(seed, kind, par, shift, t0, t1, x0, x1):
    """Weights on the rectangle [t0, t1) x [x0, x1)."""
    out = np.empty((t1 - t0, x1 - x0))
    skey = seed_key(seed)
    for i in range(t1 - t0):
        rk = row_key(skey, t0 + i)
        for j in range(x1 - x0):
            out[i, j] = weight_from_uniform(kind, par, shift,
                                            site_uniform(rk, x0 + j))
    return out
