"""Polynomial chaos expansion of the quenched density in the centered weights
w_hat = 2w - 1.

P(n, y) = sum_k sum_{z_1 < ... < z_k} phi_k^{(n,y)}(z_1..z_k) prod w_hat(z_l), with

    phi_k = 2^{-k} p(i_1, j_1) prod_l D(z_l -> z_{l+1}) D(z_k -> (n, y)),
    D((i, j) -> (i', j')) = p(i'-i-1, j'-j-1) - p(i'-i-1, j'-j+1),

where p is the simple symmetric random walk kernel.
"""

import math
from fractions import Fraction
from itertools import combinations, product

import numpy as np

MAX_RECONSTRUCT = 10


def srw_kernel(n, y):
    """p(n, y) = 2^{-n} C(n, (n+y)/2) on parity, else 0."""
    if n < 0 or abs(y) > n or (n + y) % 2:
        return 0.0
    if n <= 30:
        return float(srw_kernel_exact(n, y))
    return math.exp(math.lgamma(n + 1) - math.lgamma((n + y) // 2 + 1)
                    - math.lgamma((n - y) // 2 + 1) - n * math.log(2.0))


def srw_kernel_exact(n, y):
    if n < 0 or abs(y) > n or (n + y) % 2:
        return Fraction(0)
    return Fraction(math.comb(n, (n + y) // 2), 2 ** n)


def difference_kernel(z, z2):
    """D(z -> z2) = p(di - 1, dj - 1) - p(di - 1, dj + 1)."""
    di = z2[0] - z[0]
    dj = z2[1] - z[1]
    return srw_kernel(di - 1, dj - 1) - srw_kernel(di - 1, dj + 1)


def chaos_coefficient(n, y, zs):
    """phi_k^{(n,y)}(z_1..z_k) for space-time points z_l = (i_l, j_l)."""
    zs = [tuple(z) for z in zs]
    if not zs:
        return srw_kernel(n, y)
    times = [z[0] for z in zs]
    if any(b <= a for a, b in zip(times, times[1:])) or times[0] < 0 or times[-1] > n - 1:
        raise ValueError("times must satisfy 0 <= i_1 < ... < i_k <= n - 1")
    val = srw_kernel(*zs[0])
    for a, b in zip(zs, zs[1:] + [(n, y)]):
        val *= 0.5 * difference_kernel(a, b)
    return val


def _sites(n):
    return [(i, j) for i in range(n) for j in range(-i, i + 1, 2)]


def chaos_terms(env, n, y, kmax=None):
    """Order-by-order terms sum_{z} phi_k prod w_hat for k = 0..kmax (default n)."""
    if n > MAX_RECONSTRUCT:
        raise ValueError(f"reconstruction capped at n <= {MAX_RECONSTRUCT}")
    kmax = n if kmax is None else kmax
    sites = _sites(n)
    what = {z: 2.0 * env.weight(*z) - 1.0 for z in sites}
    terms = [srw_kernel(n, y)]
    # G_k(z) = sum over k-tuples ending at z of the coefficient up to z, times the weights
    G = {z: srw_kernel(*z) * what[z] for z in sites}
    for k in range(1, kmax + 1):
        terms.append(sum(0.5 * difference_kernel(z, (n, y)) * g for z, g in G.items()))
        G = {z2: what[z2] * sum(0.5 * difference_kernel(z, z2) * g
                                for z, g in G.items() if z[0] < z2[0])
             for z2 in sites}
    return terms


def reconstruct(env, n, y):
    """P(n, y) from the full chaos expansion."""
    if (n + y) % 2:
        return 0.0
    return math.fsum(chaos_terms(env, n, y))


def chaos_term_bruteforce(env, n, y, k):
    """Order-k term by explicit enumeration of ordered k-tuples (tiny n only)."""
    sites = _sites(n)
    total = 0.0
    for times in combinations(range(n), k):
        for js in product(*[range(-i, i + 1, 2) for i in times]):
            zs = list(zip(times, js))
            c = chaos_coefficient(n, y, zs)
            if c:
                total += c * np.prod([2.0 * env.weight(*z) - 1.0 for z in zs])
    del sites
    return total


def lattice_site(N, t, x):
    """Integer site of parity Nt nearest to N^{1/2} x + N^{3/4} t."""
    n = int(round(t * N))
    target = math.sqrt(N) * x + float(N) ** 0.75 * t
    y = int(math.floor(target))
    if (y - n) % 2:
        y = y + 1 if target - y > 0.5 else y - 1
    return n, y


def first_order_variance_limit(sigma2, t, x):
    """8 sigma^2 int_0^t int p_s(z)^2 p_{t-s}(x-z)^2 dz ds = 8 sigma^2 p_t(x)^2 sqrt(pi t) / 2."""
    p = math.exp(-x * x / (2 * t)) / math.sqrt(2 * math.pi * t)
    return 8.0 * sigma2 * p * p * math.sqrt(math.pi * t) / 2.0


def first_order_variance_paired_limit(sigma2, t, phi):
    """8 sigma^2 int_0^t int (p_s(z) (P_{t-s} phi)(z))^2 dz ds for a gaussian phi = xi_eps^a.

    With T = t + eps^2 / 2 this equals 8 sigma^2 p_T(a)^2 sqrt(T / pi) arcsin(sqrt(t / T)).
    """
    if phi.kind != "gaussian":
        raise ValueError("closed form available for gaussian test functions only")
    T = t + 0.5 * phi.eps ** 2
    p = math.exp(-phi.a ** 2 / (2 * T)) / math.sqrt(2 * math.pi * T)
    return 8.0 * sigma2 * p * p * math.sqrt(T / math.pi) * math.asin(math.sqrt(t / T))


def first_order_variance_exact(N, t, sigma2, x=None, phi=None):
    """Exact variance of the order-1 term at finite N.

    Pointwise (``x`` given) the term is (sqrt(N)/2) C sum_z phi_1 w_hat; paired
    (``phi`` given) it is sum_y phi(u_y) C sum_z phi_1^{(n,y)} w_hat.  Either way it
    is sum_z K(z) w_hat(z) with K the tilted propagator to z times the tilted
    difference kernel from z to the target, so the variance is 4 sigma^2 sum K^2.
    """
    n = int(round(t * N))
    r = 1.0 / (1.0 + math.exp(-2.0 * float(N) ** -0.25))
    fwd = [np.array([1.0])]
    for i in range(n):
        f = fwd[-1]
        g = np.zeros(i + 2)
        g[1:] += r * f
        g[:-1] += (1.0 - r) * f
        fwd.append(g)
    if phi is None:
        n, y = lattice_site(N, t, x)
        b = np.zeros(n + 1)
        b[(y + n) // 2] = math.sqrt(N) / 2.0
    else:
        ys = 2 * np.arange(n + 1) - n
        b = np.asarray(phi((ys - float(N) ** -0.25 * n) / math.sqrt(N)), dtype=float)
    back = [None] * (n + 1)
    back[n] = b
    for i in range(n - 1, -1, -1):
        nb = back[i + 1]
        back[i] = r * nb[1:i + 2] + (1.0 - r) * nb[0:i + 1]
    total = 0.0
    for i in range(n):
        nb = back[i + 1]
        # an order-1 insertion at (i, y) sends +r to y + 1 and -(1 - r) to y - 1
        kern = r * nb[1:i + 2] - (1.0 - r) * nb[0:i + 1]
        total += float(np.sum((fwd[i] * kern) ** 2))
    return 4.0 * sigma2 * total
