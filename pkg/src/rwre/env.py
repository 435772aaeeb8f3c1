"""Weight laws on [0, 1] and seeded space-time environments."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from . import rng

KINDS = ("degenerate-half", "two-point", "beta", "uniform", "bernoulli-half")
DEFAULT_KMAX = 8


@dataclass(frozen=True)
class EnvSpec:
    """A weight law on [0, 1], optionally shifted by ``shift`` and clipped at 1.

    ``moments[b, c]`` holds the mixed moment of x^b (1 - x)^c for b + c <= kmax.
    """

    kind: str
    param: float
    shift: float
    mu: float
    sigma2: float
    moments: np.ndarray = field(repr=False, compare=False)
    kmax: int = DEFAULT_KMAX

    @property
    def code(self):
        return {"degenerate-half": rng.KIND_DEGENERATE,
                "two-point": rng.KIND_TWO_POINT,
                "beta": rng.KIND_BETA,
                "bernoulli-half": rng.KIND_BERNOULLI}[self.kind]

    @property
    def finite_support(self):
        return self.kind != "beta"

    def atoms(self):
        """Support points and probabilities of a finite-support law."""
        if self.kind == "degenerate-half":
            pts, probs = [0.5], [1.0]
        elif self.kind == "two-point":
            pts, probs = [0.5 - self.param, 0.5 + self.param], [0.5, 0.5]
        elif self.kind == "bernoulli-half":
            pts, probs = [0.0, 1.0], [0.5, 0.5]
        else:
            raise ValueError("beta laws have no finite support")
        pts = [min(1.0, p + self.shift) for p in pts]
        return np.array(pts), np.array(probs)

    def describe(self):
        if self.kind == "two-point":
            return f"two-point(a={self.param:g})"
        if self.kind == "beta":
            return f"beta(alpha={self.param:g})"
        return self.kind


def _beta_moments(alpha, kmax):
    m = np.zeros((kmax + 1, kmax + 1))
    for b in range(kmax + 1):
        for c in range(kmax + 1 - b):
            m[b, c] = math.exp(special.betaln(alpha + b, alpha + c)
                               - special.betaln(alpha, alpha))
    return m


def _atom_moments(pts, probs, kmax):
    m = np.zeros((kmax + 1, kmax + 1))
    for b in range(kmax + 1):
        for c in range(kmax + 1 - b):
            m[b, c] = float(np.sum(probs * pts ** b * (1.0 - pts) ** c))
    return m


def make_spec(kind, params=None, kmax=DEFAULT_KMAX):
    """Build a weight law with its mean, variance and mixed-moment table.

    Parameters
    ----------
    kind : str
        One of ``degenerate-half``, ``two-point``, ``beta``, ``uniform``,
        ``bernoulli-half``.
    params : dict, optional
        ``{"a": ...}`` for two-point, ``{"alpha": ...}`` for beta.
    """
    params = dict(params or {})
    if kind not in KINDS:
        raise ValueError(f"unknown weight law {kind!r}; expected one of {KINDS}")
    if kind == "uniform":
        kind, params = "beta", {"alpha": 1.0}
    if kind == "two-point":
        a = float(params.get("a", float("nan")))
        if not 0.0 <= a <= 0.5:
            raise ValueError(f"two-point parameter a must lie in [0, 1/2], got {a}")
        spec_param = a
    elif kind == "beta":
        alpha = float(params.get("alpha", float("nan")))
        if not alpha > 0.0 or not math.isfinite(alpha):
            raise ValueError(f"beta parameter alpha must be positive, got {alpha}")
        spec_param = alpha
    else:
        spec_param = 0.0
    if kind == "beta":
        m = _beta_moments(spec_param, kmax)
        sigma2 = 1.0 / (4.0 * (2.0 * spec_param + 1.0))
    else:
        proto = EnvSpec(kind, spec_param, 0.0, 0.5, 0.0, np.zeros((1, 1)), kmax)
        m = _atom_moments(*proto.atoms(), kmax)
        sigma2 = {"degenerate-half": 0.0, "two-point": spec_param ** 2,
                  "bernoulli-half": 0.25}[kind]
    return EnvSpec(kind, spec_param, 0.0, 0.5, sigma2, m, kmax)


def rho(N):
    """Mean of the skewed weight law: e^{N^{-1/4}} / (2 cosh N^{-1/4})."""
    if N < 1:
        raise ValueError("N must be >= 1")
    lam = float(N) ** -0.25
    return 1.0 / (1.0 + math.exp(-2.0 * lam))


def _clipped_mean(spec, d):
    if spec.finite_support:
        pts, probs = spec.atoms()
        return float(np.sum(probs * np.minimum(1.0, pts + d)))
    alpha = spec.param
    s = 1.0 - d
    # E[min(1, w + d)] = d + E[w] - E[(w - s)^+]
    excess = 0.5 * (1.0 - special.betainc(alpha + 1.0, alpha, s)) \
        - s * (1.0 - special.betainc(alpha, alpha, s))
    return d + 0.5 - excess


def _clipped_beta_moments(alpha, d, kmax):
    s = 1.0 - d
    lnorm = -special.betaln(alpha, alpha)
    p_atom = 1.0 - float(special.betainc(alpha, alpha, s))
    m = np.zeros((kmax + 1, kmax + 1))
    for b in range(kmax + 1):
        for c in range(kmax + 1 - b):
            def f(x, b=b, c=c):
                w = x + d
                return w ** b * (1.0 - w) ** c * math.exp(
                    lnorm + (alpha - 1.0) * (math.log(x) + math.log1p(-x)))
            val, _ = integrate.quad(f, 0.0, s, epsabs=1e-14, epsrel=1e-12, limit=200)
            if c == 0:
                val += p_atom
            m[b, c] = val
    return m


def skewed_spec(spec, N):
    """Law of min(1, w + d) with d chosen so that the mean equals rho(N)."""
    if abs(spec.mu - 0.5) > 1e-15 or spec.shift != 0.0:
        raise ValueError("skewed_spec needs an unshifted mean-1/2 law")
    target = rho(N)

    def g(d):
        return _clipped_mean(spec, d) - target

    if g(0.0) > 0.0 or g(0.5) < 0.0:
        raise ValueError(f"cannot reach mean {target} with a shift in [0, 1/2]")
    d = optimize.bisect(g, 0.0, 0.5, xtol=1e-15, maxiter=200)
    if spec.finite_support:
        shifted = EnvSpec(spec.kind, spec.param, d, 0.0, 0.0, np.zeros((1, 1)), spec.kmax)
        m = _atom_moments(*shifted.atoms(), spec.kmax)
    else:
        m = _clipped_beta_moments(spec.param, d, spec.kmax)
    mu = m[1, 0]
    return EnvSpec(spec.kind, spec.param, d, mu, m[2, 0] - mu * mu, m, spec.kmax)


def seed_u64(seed):
    """Map any Python integer to the uint64 seed used by the hash."""
    return np.uint64(int(seed) % (1 << 64))


@dataclass(frozen=True)
class Environment:
    """Seeded iid weight field w(t, x) on the space-time lattice."""

    seed: int
    spec: EnvSpec

    def weight(self, t, x):
        if t < 0:
            raise ValueError("t must be >= 0")
        return rng.weight_at(seed_u64(self.seed), self.spec.code, self.spec.param,
                             self.spec.shift, int(t), int(x))

    def grid(self, t0, t1, x0, x1):
        """Weights on [t0, t1) x [x0, x1) as an array indexed [t - t0, x - x0]."""
        return rng.weight_grid(seed_u64(self.seed), self.spec.code, self.spec.param,
                               self.spec.shift, int(t0), int(t1), int(x0), int(x1))


def weight(env, t, x):
    return env.weight(t, x)


def replica_seeds(base, n):
    """Seeds of ``n`` replica environments derived from ``base``."""
    b = seed_u64(base)
    return np.array([rng.replica_seed(b, np.uint64(i)) for i in range(n)], dtype=np.uint64)
