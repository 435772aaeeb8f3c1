"""Chaos expansion of the quenched density in the centred weights."""

import math
from fractions import Fraction

import numpy as np
import pytest

from rwre import chaos, env, qkernel
from rwre.testfn import TestFunction


def _density_by_recursion(e, n):
    """Plain-python quenched density, independent of the compiled evolution."""
    row = {0: 1.0}
    for i in range(n):
        nxt = {}
        for y, p in row.items():
            w = e.weight(i, y)
            nxt[y + 1] = nxt.get(y + 1, 0.0) + w * p
            nxt[y - 1] = nxt.get(y - 1, 0.0) + (1.0 - w) * p
        row = nxt
    return row


@pytest.mark.parametrize("n", range(31))
def test_srw_kernel_normalised(n):
    total = sum(chaos.srw_kernel_exact(n, y) for y in range(-n, n + 1))
    assert total == 1
    assert math.fsum(chaos.srw_kernel(n, y) for y in range(-n, n + 1)) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("n, y, expected", [(0, 0, 1.0), (2, 0, 0.5), (2, 2, 0.25), (3, 0, 0.0),
                                            (1, 3, 0.0), (-1, 0, 0.0)])
def test_srw_kernel_values(n, y, expected):
    assert chaos.srw_kernel(n, y) == expected


def test_srw_kernel_large_n_matches_exact():
    n, y = 40, 6
    exact = Fraction(math.comb(n, (n + y) // 2), 2 ** n)
    assert chaos.srw_kernel(n, y) == pytest.approx(float(exact), rel=1e-12)


@pytest.mark.parametrize("n, y, zs, expected", [
    (1, 1, [(0, 0)], 0.5),
    (1, -1, [(0, 0)], -0.5),
    (1, 0, [(0, 0)], 0.0),
    (2, 0, [(0, 0), (1, 1)], -0.25),
    (3, 1, [], 0.375),
])
def test_coefficient_values(n, y, zs, expected):
    assert chaos.chaos_coefficient(n, y, zs) == pytest.approx(expected, abs=1e-15)


def test_coefficient_rejects_unordered_times():
    with pytest.raises(ValueError):
        chaos.chaos_coefficient(3, 1, [(1, 1), (1, -1)])
    with pytest.raises(ValueError):
        chaos.chaos_coefficient(2, 0, [(2, 0)])


@pytest.mark.parametrize("kind, params", [("two-point", {"a": 0.25}), ("two-point", {"a": 0.4}),
                                          ("degenerate-half", None), ("bernoulli-half", None),
                                          ("uniform", None)])
@pytest.mark.parametrize("seed", range(4))
def test_reconstruction_matches_density(kind, params, seed):
    e = env.Environment(seed, env.make_spec(kind, params))
    dens = qkernel.evolve_density(e, 7)
    for n in range(8):
        ref = _density_by_recursion(e, n)
        for y, p in zip(dens[n].y, dens[n].P):
            assert chaos.reconstruct(e, n, int(y)) == pytest.approx(p, abs=1e-12)
            assert ref.get(int(y), 0.0) == pytest.approx(p, abs=1e-14)


def test_reconstruction_off_parity_is_zero():
    e = env.Environment(3, env.make_spec("uniform"))
    assert chaos.reconstruct(e, 4, 1) == 0.0


def test_reconstruction_size_cap():
    e = env.Environment(0, env.make_spec("uniform"))
    with pytest.raises(ValueError):
        chaos.chaos_terms(e, chaos.MAX_RECONSTRUCT + 1, 1)


@pytest.mark.parametrize("n, y", [(3, 1), (4, 0), (4, 2), (5, -1)])
def test_bruteforce_matches_recursion(n, y):
    e = env.Environment(11, env.make_spec("uniform"))
    terms = chaos.chaos_terms(e, n, y)
    for k in range(n + 1):
        assert chaos.chaos_term_bruteforce(e, n, y, k) == pytest.approx(terms[k], abs=1e-13)


def test_degenerate_law_has_only_order_zero():
    e = env.Environment(5, env.make_spec("degenerate-half"))
    terms = chaos.chaos_terms(e, 6, 2)
    assert terms[0] == chaos.srw_kernel(6, 2)
    assert all(t == 0.0 for t in terms[1:])


def test_dyadic_two_point_reconstruction_is_exact():
    # a = 1/4 makes every weight and coefficient dyadic, so no rounding occurs
    e = env.Environment(9, env.make_spec("two-point", {"a": 0.25}))
    dens = qkernel.evolve_density(e, 8)
    for y, p in zip(dens[8].y, dens[8].P):
        assert chaos.reconstruct(e, 8, int(y)) == p


def _order1_variance_by_coefficients(N, t, sigma2, x):
    """4 sigma^2 sum_z (tilted first-order coefficient)^2, summed site by site."""
    n, y = chaos.lattice_site(N, t, x)
    lam = float(N) ** -0.25
    C = math.exp(lam * y - n * math.log(math.cosh(lam)))
    total = 0.0
    for i in range(n):
        for j in range(-i, i + 1, 2):
            c = 0.5 * math.sqrt(N) * C * chaos.chaos_coefficient(n, y, [(i, j)])
            total += c * c
    return 4.0 * sigma2 * total


@pytest.mark.parametrize("N, x", [(16, 0.0), (16, 0.5), (64, -0.3)])
def test_first_order_variance_exact_pointwise(N, x):
    s2 = 1.0 / 12.0
    ref = _order1_variance_by_coefficients(N, 1.0, s2, x)
    assert chaos.first_order_variance_exact(N, 1.0, s2, x=x) == pytest.approx(ref, rel=1e-10)


def test_first_order_variance_exact_paired():
    N, t, s2 = 16, 1.0, 1.0 / 12.0
    phi = TestFunction.gaussian(0.0, 1.0)
    n = int(t * N)
    lam = float(N) ** -0.25
    total = 0.0
    for i in range(n):
        for j in range(-i, i + 1, 2):
            c = 0.0
            for y in range(-n, n + 1, 2):
                C = math.exp(lam * y - n * math.log(math.cosh(lam)))
                c += float(phi((y - lam * n) / math.sqrt(N))) * C * chaos.chaos_coefficient(n, y, [(i, j)])
            total += c * c
    assert chaos.first_order_variance_exact(N, t, s2, phi=phi) == pytest.approx(4 * s2 * total, rel=1e-10)


@pytest.mark.parametrize("N", [64, 256, 1024])
def test_paired_variance_approaches_limit(N):
    phi = TestFunction.gaussian(0.0, 1.0)
    s2 = 1.0 / 12.0
    lim = chaos.first_order_variance_paired_limit(s2, 1.0, phi)
    ex = chaos.first_order_variance_exact(N, 1.0, s2, phi=phi)
    # bias of order N^{-1/2}
    assert abs(ex - lim) < 2.0 * lim / math.sqrt(N) ** 0.5


def test_paired_limit_against_quadrature():
    from scipy import integrate
    phi = TestFunction.gaussian(0.3, 0.8)
    s2, t = 1.0 / 12.0, 1.0
    p = lambda s, z: math.exp(-z * z / (2 * s)) / math.sqrt(2 * math.pi * s)
    T = lambda s: s + 0.5 * phi.eps ** 2
    # P_{t-s} phi(z) is the N(a, (t-s) + eps^2/2) density at z
    Pphi = lambda s, z: p(T(t - s), z - phi.a)
    val = integrate.dblquad(lambda z, s: (p(s, z) * Pphi(s, z)) ** 2, 1e-12, t, -12, 12,
                            epsabs=1e-12, epsrel=1e-10)[0]
    assert chaos.first_order_variance_paired_limit(s2, t, phi) == pytest.approx(8 * s2 * val, rel=1e-7)


def test_pointwise_limit_formula():
    from scipy import integrate
    t, x = 1.0, 0.4
    p = lambda s, z: math.exp(-z * z / (2 * s)) / math.sqrt(2 * math.pi * s)
    # s = t sin^2(th) removes the 1/sqrt(s (t - s)) endpoint singularities
    def inner(th):
        s = t * math.sin(th) ** 2
        jac = 2 * t * math.sin(th) * math.cos(th)
        # the z-integrand is gaussian with mean x s / t and variance s (t - s) / 2t
        m, sd = x * s / t, math.sqrt(s * (t - s) / (2 * t))
        return jac * integrate.quad(lambda z: p(s, z) ** 2 * p(t - s, x - z) ** 2, m - 12 * sd, m + 12 * sd,
                                    epsabs=1e-14, epsrel=1e-11, limit=200)[0]
    val = integrate.quad(inner, 1e-9, math.pi / 2 - 1e-9, epsabs=1e-12, epsrel=1e-10, limit=200)[0]
    assert chaos.first_order_variance_limit(0.1, t, x) == pytest.approx(0.8 * val, rel=1e-6)


@pytest.mark.parametrize("N, t, x", [(256, 1.0, 0.0), (1024, 0.5, -0.7), (64, 2.0, 1.3)])
def test_lattice_site_parity_and_distance(N, t, x):
    n, y = chaos.lattice_site(N, t, x)
    assert n == round(t * N)
    assert (n + y) % 2 == 0
    assert abs(y - (math.sqrt(N) * x + N ** 0.75 * t)) <= 1.0
