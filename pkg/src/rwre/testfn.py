"""Test functions paired against the density fields.

Each kind has a numba evaluation path (``phi_eval``) keyed by an integer code
and three real parameters, so Monte Carlo kernels and numpy code evaluate the
identical function.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import integrate, optimize, special

CODE_GAUSSIAN = 0
CODE_BUMP = 1
CODE_INDICATOR = 2
CODE_POLYWINDOW = 3

_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)
# gaussian windows are cut where the function falls below ~1e-18 of its peak
# (space-time gaussians: below ~1e-9 of the peak, ~1e-18 in squared mass)
GAUSS_HALF = 6.5
ST_HALF = 6.5


@njit(cache=True)
def phi_eval(code, p, u):
    if code == CODE_GAUSSIAN:
        z = (u - p[0]) / p[1]
        return math.exp(-z * z) * _INV_SQRT_PI / p[1]
    if code == CODE_BUMP:
        z = (u - p[0]) / p[1]
        if abs(z) >= 1.0:
            return 0.0
        return math.exp(-1.0 / (1.0 - z * z))
    if code == CODE_INDICATOR:
        return 1.0 if p[0] <= u <= p[1] else 0.0
    z = (u - p[0]) / p[1]
    if abs(z) >= 1.0:
        return 0.0
    w = 1.0 - z * z
    return (u - p[0]) ** p[2] * w * w


@njit(cache=True)
def phi_window(code, p):
    """Interval outside of which the function is zero (or below 1e-18 of its peak)."""
    if code == CODE_GAUSSIAN:
        return p[0] - GAUSS_HALF * p[1], p[0] + GAUSS_HALF * p[1]
    if code == CODE_INDICATOR:
        return p[0], p[1]
    return p[0] - p[1], p[0] + p[1]


@dataclass(frozen=True)
class TestFunction:
    """A real test function with known sup norm, C^1 norm and support radius.

    Kinds
    -----
    gaussian
        xi_eps^a(x) = eps^{-1} xi((x - a) / eps) with xi(x) = exp(-x^2) / sqrt(pi).
    bump
        exp(-1 / (1 - z^2)) for |z| < 1, z = (x - a) / w.
    indicator
        1 on the closed interval [lo, hi].
    polywindow
        (x - a)^m (1 - z^2)^2 for |z| < 1, z = (x - a) / w.
    """

    __test__ = False

    kind: str
    a: float = 0.0
    eps: float = 1.0
    lo: float = -1.0
    hi: float = 1.0
    m: int = 0

    @classmethod
    def gaussian(cls, a=0.0, eps=1.0):
        if eps <= 0:
            raise ValueError("eps must be positive")
        return cls("gaussian", a=float(a), eps=float(eps))

    @classmethod
    def bump(cls, a=0.0, width=1.0):
        if width <= 0:
            raise ValueError("width must be positive")
        return cls("bump", a=float(a), eps=float(width))

    @classmethod
    def indicator(cls, lo=-1.0, hi=1.0):
        if not lo < hi:
            raise ValueError("indicator needs lo < hi")
        return cls("indicator", lo=float(lo), hi=float(hi))

    @classmethod
    def polywindow(cls, a=0.0, width=1.0, m=0):
        if width <= 0 or m < 0:
            raise ValueError("polywindow needs width > 0 and m >= 0")
        return cls("polywindow", a=float(a), eps=float(width), m=int(m))

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind")
        if kind == "gaussian":
            return cls.gaussian(d.get("a", 0.0), d.get("eps", 1.0))
        if kind == "bump":
            return cls.bump(d.get("a", 0.0), d.get("width", 1.0))
        if kind == "indicator":
            return cls.indicator(d.get("lo", -1.0), d.get("hi", 1.0))
        if kind == "polywindow":
            return cls.polywindow(d.get("a", 0.0), d.get("width", 1.0), d.get("m", 0))
        raise ValueError(f"unknown test function kind {kind!r}")

    @property
    def code(self):
        return {"gaussian": CODE_GAUSSIAN, "bump": CODE_BUMP,
                "indicator": CODE_INDICATOR, "polywindow": CODE_POLYWINDOW}[self.kind]

    @property
    def params(self):
        if self.kind == "indicator":
            return np.array([self.lo, self.hi, 0.0])
        return np.array([self.a, self.eps, float(self.m)])

    def label(self):
        if self.kind == "gaussian":
            return f"gaussian(a={self.a:g},eps={self.eps:g})"
        if self.kind == "indicator":
            return f"indicator[{self.lo:g},{self.hi:g}]"
        if self.kind == "bump":
            return f"bump(a={self.a:g},w={self.eps:g})"
        return f"polywindow(a={self.a:g},w={self.eps:g},m={self.m})"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            z = (x - self.a) / self.eps
            return np.exp(-z * z) * _INV_SQRT_PI / self.eps
        if self.kind == "indicator":
            return ((x >= self.lo) & (x <= self.hi)).astype(float)
        z = (x - self.a) / self.eps
        inside = np.abs(z) < 1.0
        zz = np.where(inside, z, 0.0)
        if self.kind == "bump":
            return np.where(inside, np.exp(-1.0 / (1.0 - zz * zz)), 0.0)
        return np.where(inside, (x - self.a) ** self.m * (1.0 - zz * zz) ** 2, 0.0)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "indicator":
            raise ValueError("indicator has no derivative")
        z = (x - self.a) / self.eps
        if self.kind == "gaussian":
            return -2.0 * z / self.eps * self(x)
        inside = np.abs(z) < 1.0
        zz = np.where(inside, z, 0.0)
        if self.kind == "bump":
            q = 1.0 - zz * zz
            return np.where(inside, self(x) * (-2.0 * zz / (q * q)) / self.eps, 0.0)
        w = 1.0 - zz * zz
        d = x - self.a
        dm = self.m * d ** (self.m - 1) if self.m > 0 else 0.0 * d
        val = dm * w * w + d ** self.m * 2.0 * w * (-2.0 * zz / self.eps)
        return np.where(inside, val, 0.0)

    def support_radius(self):
        """Smallest A with the support inside [-A, A]; inf for the Gaussian."""
        if self.kind == "gaussian":
            return math.inf
        if self.kind == "indicator":
            return max(abs(self.lo), abs(self.hi))
        return abs(self.a) + self.eps

    def sup_norm(self):
        if self.kind == "gaussian":
            return _INV_SQRT_PI / self.eps
        if self.kind in ("indicator", "bump"):
            return 1.0 if self.kind == "indicator" else math.exp(-1.0)
        return _maximize(lambda z: abs(self(self.a + z * self.eps)))

    def c1_norm(self):
        """sup|phi| + sup|phi'|; infinite for the indicator."""
        if self.kind == "indicator":
            return math.inf
        if self.kind == "gaussian":
            return _INV_SQRT_PI / self.eps + math.sqrt(2.0 / math.e) * _INV_SQRT_PI / self.eps ** 2
        deriv = _maximize(lambda z: abs(float(self.derivative(self.a + z * self.eps))))
        return self.sup_norm() + deriv

    def heat_pairing(self, t):
        """Integral of p_t(x) phi(x) dx."""
        if self.kind == "gaussian":
            s2 = t + 0.5 * self.eps ** 2
            return math.exp(-self.a ** 2 / (2.0 * s2)) / math.sqrt(2.0 * math.pi * s2)
        if self.kind == "indicator":
            st = math.sqrt(2.0 * t)
            return 0.5 * (special.erf(self.hi / st) - special.erf(self.lo / st))
        f = lambda x: float(self(x)) * math.exp(-x * x / (2 * t)) / math.sqrt(2 * math.pi * t)
        val, _ = integrate.quad(f, self.a - self.eps, self.a + self.eps,
                                epsabs=1e-13, epsrel=1e-12, limit=200)
        return val


def _maximize(f):
    """Max of f on [-1, 1] by a dense scan followed by local refinement."""
    zs = np.linspace(-1.0, 1.0, 4001)
    vals = np.array([f(z) for z in zs])
    i = int(np.argmax(vals))
    lo, hi = zs[max(i - 1, 0)], zs[min(i + 1, len(zs) - 1)]
    res = optimize.minimize_scalar(lambda z: -f(z), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12})
    return max(vals[i], -res.fun)


@dataclass(frozen=True)
class SpaceTimeGaussian:
    """phi(t, x) = exp(-(t - t0)^2 / (2 st^2) - (x - x0)^2 / (2 sx^2))."""

    __test__ = False

    t0: float = 0.5
    x0: float = 0.0
    st: float = 0.1
    sx: float = 0.5

    def __call__(self, t, x):
        return np.exp(-(t - self.t0) ** 2 / (2 * self.st ** 2)
                      - (x - self.x0) ** 2 / (2 * self.sx ** 2))

    def l2_norm_sq(self):
        return math.pi * self.st * self.sx

    @property
    def params(self):
        return np.array([self.t0, self.x0, self.st, self.sx])
