"""Continuum reference values for the stochastic heat equation with delta
initial data: heat kernel, noise coefficient, moments via Brownian-bridge
local times, the two-point contour integral, and the extremal limit law.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats


@dataclass(frozen=True)
class ReferenceValue:
    value: float
    error: float
    method: str


def heat_kernel(t, x):
    """p_t(x) = (2 pi t)^{-1/2} exp(-x^2 / 2t)."""
    if np.any(np.asarray(t) <= 0):
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    return np.exp(-x * x / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)


def gamma_coeff(sigma2):
    """gamma = sqrt(8 sigma^2 / (1 - 4 sigma^2))."""
    if not 0.0 <= sigma2 < 0.25:
        raise ValueError("sigma2 must lie in [0, 1/4)")
    return math.sqrt(8.0 * sigma2 / (1.0 - 4.0 * sigma2))


# ---------------------------------------------------------------------------
# moments through Brownian-bridge local times


def _bridges(gen, k, t, xs, n_steps, n_paths):
    """Brownian bridges 0 -> xs[i] on [0, t] at n_steps + 1 grid times."""
    dt = t / n_steps
    times = np.linspace(0.0, t, n_steps + 1)
    out = np.empty((k, n_paths, n_steps + 1))
    for i in range(k):
        inc = gen.standard_normal((n_paths, n_steps)) * math.sqrt(dt)
        w = np.concatenate((np.zeros((n_paths, 1)), np.cumsum(inc, axis=1)), axis=1)
        out[i] = w - (times / t)[None, :] * (w[:, -1:] - xs[i])
    return out


def she_moment_bridge_mc(k, t, xs, gamma, paths=20000, dt=1e-3, delta=0.05,
                         seed=0, richardson=True, chunk=2000):
    """E[prod_i U_t(x_i)] for the SHE with delta initial data.

    Equals prod p_t(x_i) E[exp(gamma^2 sum_{i<j} L^{ij})] over independent
    bridges 0 -> x_i, where L^{ij} is the occupation density at 0 of B^i - B^j.
    The difference has quadratic-variation rate 2, so its semimartingale local
    time is 2 L^{ij} and the weight equals exp((gamma^2/2) sum L_sem).
    L^{ij} is estimated by the band occupation |B^i - B^j| <= delta divided by
    2 delta; with ``richardson`` the moment is extrapolated as
    2 E(delta/2) - E(delta) on the same paths.
    """
    xs = np.asarray(xs, dtype=float)
    if len(xs) != k or k > 4:
        raise ValueError("need k <= 4 points")
    base = float(np.prod(heat_kernel(t, xs)))
    if k == 1 or gamma == 0.0:
        return ReferenceValue(base, 0.0, "closed-form")
    gen = np.random.default_rng(seed)
    n_steps = int(round(t / dt))
    g2 = gamma * gamma
    samples = []
    done = 0
    while done < paths:
        m = min(chunk, paths - done)
        B = _bridges(gen, k, t, xs, n_steps, m)
        occ_d = np.zeros(m)
        occ_h = np.zeros(m)
        for i in range(k):
            for j in range(i + 1, k):
                D = np.abs(B[i] - B[j])
                # trapezoid weights in time
                wt = np.full(n_steps + 1, dt)
                wt[0] = wt[-1] = 0.5 * dt
                occ_d += (D <= delta) @ wt / (2.0 * delta)
                occ_h += (D <= 0.5 * delta) @ wt / delta
        e_d = np.exp(g2 * occ_d)
        e_h = np.exp(g2 * occ_h)
        samples.append(2.0 * e_h - e_d if richardson else e_d)
        done += m
    s = np.concatenate(samples)
    return ReferenceValue(base * float(s.mean()), base * float(s.std(ddof=1)) / math.sqrt(len(s)),
                          "bridge-MC")


# ---------------------------------------------------------------------------
# two-point moment: contour integral and its closed form


def _line_nodes(half, rate, nodes_per_period):
    h = 2.0 * math.pi / (rate * nodes_per_period)
    n = int(math.ceil(2.0 * half / h)) | 1
    v = np.linspace(-half, half, n)
    return v, v[1] - v[0]


def _blocked_sum(z1, z2, g1, g2, kernel, block=512):
    """sum_{i,j} g1_i kernel(z1_i, z2_j) g2_j without forming the full matrix."""
    total = 0.0 + 0.0j
    for s in range(0, len(z1), block):
        zz = z1[s:s + block, None]
        total += np.sum(g1[s:s + block, None] * kernel(zz, z2[None, :]) * g2[None, :])
    return total


def two_point_contour(t, x, y, alpha, r1=0.0, gap=1.0, nodes_per_period=40):
    """E[U_t(x) U_t(y)] from the double contour integral

        alpha^{-2} int int (z2 - z1)/(z2 - z1 - 1) exp(t (z1^2 + z2^2)/(2 alpha^2)
                                                     - (x z1 + y z2)/alpha) dz1 dz2 / (2 pi i)^2

    on the vertical lines Re z1 = r1, Re z2 = r1 + 1 + gap, truncated at
    |Im z| = 12 max(1, alpha/sqrt(t)) (1 + |x| + |y|).  The integral is the
    two-point moment on the ordered chamber x <= y, so the arguments are
    sorted first.  Returns (real part, imaginary part).
    """
    if alpha <= 0 or t <= 0:
        raise ValueError("alpha and t must be positive")
    if gap <= 0:
        raise ValueError("contours need Re z2 > Re z1 + 1")
    x, y = min(x, y), max(x, y)
    r2 = r1 + 1.0 + gap
    half = 12.0 * max(1.0, alpha / math.sqrt(t)) * (1.0 + abs(x) + abs(y))
    # phase rates of the two exponentials along the lines, the Gaussian scale,
    # and the scale on which the rational factor varies
    rate = max(abs(t * r1 / alpha ** 2 - x / alpha), abs(t * r2 / alpha ** 2 - y / alpha),
               math.sqrt(t) / alpha, 1.0 / gap)
    v, h = _line_nodes(half, rate, nodes_per_period)
    z1 = r1 + 1j * v
    z2 = r2 + 1j * v
    e1 = np.exp(t * z1 * z1 / (2 * alpha * alpha) - x * z1 / alpha)
    e2 = np.exp(t * z2 * z2 / (2 * alpha * alpha) - y * z2 / alpha)
    val = _blocked_sum(z1, z2, e1, e2, lambda a, b: (b - a) / (b - a - 1.0))
    # dz1 dz2 = -dv1 dv2 and (2 pi i)^2 = -4 pi^2
    val *= h * h / (4.0 * math.pi ** 2) / alpha ** 2
    return float(val.real), float(val.imag)


def two_point_closed_form(t, x, y, gamma):
    """E[U_t(x) U_t(y)] from the local-time law of a Brownian bridge.

    p_t(x) p_t(y) [1 + gamma^2 int_0^inf exp(gamma^2 m - (m^2 + |x - y| m)/t) dm].
    """
    g2 = gamma * gamma
    b = g2 - abs(x - y) / t
    # int_0^inf exp(-m^2/t + b m) dm = sqrt(pi t)/2 exp(b^2 t/4) erfc(-b sqrt(t)/2)
    s = 0.5 * math.sqrt(math.pi * t) * special.erfcx(-0.5 * b * math.sqrt(t))
    return float(heat_kernel(t, x) * heat_kernel(t, y)) * (1.0 + g2 * s)


def two_point_paired_contour(t, phi, alpha, r1=0.0, gap=1.0, nodes_per_period=40):
    """E[U_t(phi)^2] for phi = xi_eps^a from a single double contour integral.

    phi is the N(a, s^2) density with s^2 = eps^2/2.  Pairing the ordered-chamber
    integrand against phi(x) phi(y) 1{x < y} and doubling gives, per (z1, z2),

        2 M(z1) M(z2) P(Y > X),  M(z) = exp(-a z/alpha + s^2 z^2/(2 alpha^2)),

    where under the complex tilt Y - X ~ N(s^2 (z1 - z2)/alpha, 2 s^2), so
    P(Y > X) = erfc(-s (z1 - z2)/(2 alpha)) / 2.  The erfc is evaluated as
    exp(-w^2) wofz(i w), which stays finite along the contours.
    """
    if phi.kind != "gaussian":
        raise ValueError("the paired contour needs a gaussian test function")
    if gap <= 0:
        raise ValueError("contours need Re z2 > Re z1 + 1")
    a = phi.a
    s = phi.eps / math.sqrt(2.0)
    r2 = r1 + 1.0 + gap
    T = t + s * s
    half = 12.0 * max(1.0, alpha / math.sqrt(t)) * (1.0 + 2.0 * abs(a))
    rate = max(abs(T * r1 / alpha ** 2 - a / alpha), abs(T * r2 / alpha ** 2 - a / alpha),
               math.sqrt(T) / alpha, s / alpha, 1.0 / gap)
    v, h = _line_nodes(half, rate, nodes_per_period)
    z1 = r1 + 1j * v
    z2 = r2 + 1j * v
    g1 = np.exp(T * z1 * z1 / (2 * alpha ** 2) - a * z1 / alpha)
    g2 = np.exp(T * z2 * z2 / (2 * alpha ** 2) - a * z2 / alpha)

    def kern(p, q):
        w = -s * (p - q) / (2.0 * alpha)
        return (q - p) / (q - p - 1.0) * np.exp(-w * w) * special.wofz(1j * w)

    val = _blocked_sum(z1, z2, g1, g2, kern)
    val *= h * h / (4.0 * math.pi ** 2) / alpha ** 2
    return float(val.real), float(val.imag)


def two_point_paired_closed(t, phi, gamma, n_nodes=80):
    """E[U_t(phi)^2] by quadrature of the closed-form two-point moment.

    The kernel has a kink on the diagonal, so the quadrature runs in the rotated
    coordinates (x + y, x - y) with the difference restricted to one sign.
    """
    if phi.kind == "gaussian":
        c, hw = phi.a, 9.0 * phi.eps
    elif phi.kind == "indicator":
        c, hw = 0.5 * (phi.lo + phi.hi), 0.5 * (phi.hi - phi.lo)
    else:
        c, hw = phi.a, phi.eps
    xg, wg = np.polynomial.legendre.leggauss(n_nodes)
    # y - x = d in [0, 2 hw], x + y = 2c + m with |m| <= 2 hw - d
    total = 0.0
    for dn, dw in zip(xg, wg):
        d = hw * (dn + 1.0)
        span = 2.0 * hw - d
        ms = span * xg
        xs = c + 0.5 * (ms - d)
        ys = c + 0.5 * (ms + d)
        vals = phi(xs) * phi(ys)
        if not np.any(vals):
            continue
        K = np.array([two_point_closed_form(t, a, b, gamma) for a, b in zip(xs, ys)])
        # dx dy = dd dm / 2; both orderings give a factor 2
        total += hw * dw * span * float(np.sum(wg * vals * K))
    return total


def two_point_paired(t, phi, gamma, method="contour"):
    """E[U_t(phi)^2] with an error bar, by the contour or the closed form."""
    if method == "contour":
        val, im = two_point_paired_contour(t, phi, 1.0 / (gamma * gamma))
        return ReferenceValue(val, max(abs(im), 1e-10), "contour")
    return ReferenceValue(two_point_paired_closed(t, phi, gamma), 1e-10, "closed-form")


def noise_correlation_limit(sigma2, t, phi):
    """Limit of corr(M(t, phi), W(t, phi)) and its Cauchy-Schwarz factor.

    With U the SHE solution, Cov = 4 sigma^2 int int phi^2 p, Var M =
    gamma^2 int int phi^2 E[U^2] and Var W = 2 sigma^2 t int phi^2, so
    corr^2 = (1 - 4 sigma^2) cs with
    cs = (int int phi^2 p)^2 / (int int phi^2 E[U^2] * t int phi^2) <= 1.
    Returns (corr, cs).
    """
    from scipy import integrate
    g = gamma_coeff(sigma2)
    lo, hi = _phi_range(phi)
    f2 = lambda x: float(phi(x)) ** 2
    a = integrate.dblquad(lambda x, s: f2(x) * float(heat_kernel(s, x)), 0.0, t, lo, hi,
                          epsabs=1e-11, epsrel=1e-9)[0]
    b = integrate.dblquad(lambda x, s: f2(x) * two_point_closed_form(s, x, x, g), 0.0, t, lo, hi,
                          epsabs=1e-11, epsrel=1e-9)[0]
    c = t * integrate.quad(f2, lo, hi, epsabs=1e-12, epsrel=1e-10)[0]
    cs = a * a / (b * c)
    return math.sqrt((1.0 - 4.0 * sigma2) * cs), cs


def _phi_range(phi):
    if phi.kind == "gaussian":
        return phi.a - 7.0 * phi.eps, phi.a + 7.0 * phi.eps
    if phi.kind == "indicator":
        return phi.lo, phi.hi
    return phi.a - phi.eps, phi.a + phi.eps


# ---------------------------------------------------------------------------
# extremes


def k_of_N(N, c, d=0.0, r_N=0.0):
    """Number of walkers floor(exp(c sqrt(N)/2 + d N^{1/4} + r_N))."""
    return math.floor(math.exp(0.5 * c * math.sqrt(N) + d * float(N) ** 0.25 + r_N))


def centering(N, c, d, t, r_N=0.0):
    """a_N = sqrt(c t N) + d sqrt(t/c) N^{1/4} + sqrt(t/c) (r_N - log(N)/4)."""
    s = math.sqrt(t / c)
    return math.sqrt(c * t * N) + d * s * float(N) ** 0.25 + s * (r_N - 0.25 * math.log(N))


def extreme_shift(c, d, t, log_u=None):
    """Deterministic part of the limit: sqrt(t/c) (-c^2/(12 t) + log U).

    ``log_u`` defaults to the sigma = 0 value log(sqrt(c/t) p_{c^2/t}(d sqrt(c/t))) = log p_c(d).
    """
    if log_u is None:
        log_u = math.log(float(heat_kernel(c, d)))
    return math.sqrt(t / c) * (-c * c / (12.0 * t) + log_u)


@dataclass(frozen=True)
class ExtremeReference:
    """Recentered max limit: scale * Gumbel + shift (+ scale * log U when random)."""

    a_N: float
    scale: float
    shift: float

    def cdf(self, x):
        return stats.gumbel_r.cdf((np.asarray(x) - self.shift) / self.scale)

    def sample(self, n, seed):
        gen = np.random.default_rng(seed)
        return self.shift + self.scale * gen.gumbel(size=n)

    def variance(self):
        return self.scale ** 2 * math.pi ** 2 / 6.0


def extreme_reference(c, d, t, N, r_N=0.0):
    """Centering a_N and the sigma = 0 limit law of N^{-1/4} max - a_N."""
    if c <= 0 or t <= 0:
        raise ValueError("c and t must be positive")
    return ExtremeReference(centering(N, c, d, t, r_N), math.sqrt(t / c), extreme_shift(c, d, t))
