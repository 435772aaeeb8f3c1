import math

import numpy as np
import pytest
from scipy import integrate

from rwre import env

KINDS = [("degenerate-half", {}), ("two-point", {"a": 0.25}), ("two-point", {"a": 0.1}),
         ("beta", {"alpha": 1.0}), ("beta", {"alpha": 3.0}), ("bernoulli-half", {})]


def test_two_point_variance():
    s = env.make_spec("two-point", {"a": 0.25})
    assert s.mu == 0.5
    assert s.sigma2 == pytest.approx(1 / 16, abs=1e-15)


def test_uniform_variance_by_quadrature():
    s = env.make_spec("beta", {"alpha": 1.0})
    second, _ = integrate.quad(lambda x: x * x, 0.0, 1.0)
    assert s.sigma2 == pytest.approx(second - 0.25, abs=1e-12)
    assert env.make_spec("uniform").sigma2 == s.sigma2


def test_bernoulli_is_the_coalescing_boundary():
    assert env.make_spec("bernoulli-half").sigma2 == 0.25


@pytest.mark.parametrize("kind,params", KINDS)
def test_moment_table(kind, params):
    s = env.make_spec(kind, params)
    m = s.moments
    assert m[0, 0] == 1.0
    assert m[1, 0] == pytest.approx(s.mu, abs=1e-14)
    assert m[1, 0] + m[0, 1] == pytest.approx(1.0, abs=1e-14)
    assert m[2, 0] - s.mu ** 2 == pytest.approx(s.sigma2, abs=1e-14)
    assert 0.0 <= s.sigma2 <= s.mu * (1 - s.mu) + 1e-15
    for b in range(s.kmax):
        for c in range(s.kmax - b):
            assert m[b, c] == pytest.approx(m[b + 1, c] + m[b, c + 1], abs=1e-13)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        env.make_spec("gamma")
    with pytest.raises(ValueError):
        env.make_spec("two-point", {"a": 0.7})


def test_degenerate_weights_are_half():
    e = env.Environment(3, env.make_spec("degenerate-half"))
    assert np.all(e.grid(0, 50, -50, 50) == 0.5)
    assert e.weight(17, -4) == 0.5


@pytest.mark.parametrize("kind,params", KINDS)
def test_weights_are_pure_functions(kind, params):
    e = env.Environment(12345, env.make_spec(kind, params))
    a = e.grid(0, 20, -20, 20)
    b = e.grid(0, 20, -20, 20)
    assert a.tobytes() == b.tobytes()
    assert all(e.weight(t, x) == a[t, x + 20] for t, x in [(0, 0), (5, -3), (19, 19)])
    assert np.all((a >= 0) & (a <= 1))


def test_grid_window_does_not_shift_the_stream():
    e = env.Environment(9, env.make_spec("uniform"))
    assert np.array_equal(e.grid(3, 8, -5, 5)[1:4, 2:7], e.grid(4, 7, -3, 2))


def test_two_point_frequencies():
    a = 0.25
    w = env.Environment(77, env.make_spec("two-point", {"a": a})).grid(0, 1000, -500, 500).ravel()
    assert set(np.unique(w)) == {0.5 - a, 0.5 + a}
    n = len(w)
    p = np.mean(w > 0.5)
    assert abs(p - 0.5) <= 4 * math.sqrt(0.25 / n)


@pytest.mark.parametrize("alpha", [1.0, 3.0])
def test_beta_marginal_moments(alpha):
    s = env.make_spec("beta", {"alpha": alpha})
    w = env.Environment(5, s).grid(0, 1000, -500, 500).ravel()
    n = len(w)
    for k in (1, 2, 3):
        target = s.moments[k, 0]
        assert abs(np.mean(w ** k) - target) <= 4 * np.std(w ** k) / math.sqrt(n)


def test_rho_values():
    assert env.rho(16) == pytest.approx(0.7310585786300049, abs=1e-15)
    assert env.rho(1) == pytest.approx(0.8807970779778823, abs=1e-15)


@pytest.mark.parametrize("N", [2 ** 8, 2 ** 12, 2 ** 16])
def test_rho_expansion(N):
    # rho - 1/2 - N^{-1/4}/2 = -N^{-3/4}/6 + O(N^{-5/4})
    d = (env.rho(N) - 0.5 - 0.5 * N ** -0.25) * N ** 0.75
    assert abs(d + 1 / 6) < N ** -0.5


def test_skewed_degenerate():
    N = 64
    s = env.skewed_spec(env.make_spec("degenerate-half"), N)
    assert s.shift == pytest.approx(env.rho(N) - 0.5, abs=1e-14)
    assert s.sigma2 == 0.0


def test_skewed_two_point_without_clipping():
    N = 256
    s = env.skewed_spec(env.make_spec("two-point", {"a": 0.25}), N)
    assert s.shift == pytest.approx(env.rho(N) - 0.5, abs=1e-12)
    assert 0.75 + s.shift < 1.0


@pytest.mark.parametrize("kind,params", [k for k in KINDS if k[0] != "degenerate-half"])
def test_skewed_variance_tends_to_sigma2(kind, params):
    s = env.make_spec(kind, params)
    gaps = [abs(env.skewed_spec(s, N).sigma2 - s.sigma2) for N in (2 ** 8, 2 ** 12)]
    assert gaps[1] <= gaps[0]
    assert gaps[1] < 2 ** -3  # N^{-1/4} at N = 2^12


@pytest.mark.parametrize("kind,params", KINDS)
@pytest.mark.parametrize("logN", [4, 8, 12, 16])
def test_skewed_mean_is_rho(kind, params, logN):
    N = 2 ** logN
    assert env.skewed_spec(env.make_spec(kind, params), N).mu == pytest.approx(env.rho(N), abs=1e-10)


def test_replica_seeds_deterministic_and_distinct():
    a = env.replica_seeds(42, 1000)
    assert a.dtype == np.uint64
    assert np.array_equal(a, env.replica_seeds(42, 1000))
    assert len(np.unique(a)) == 1000
    assert not np.array_equal(a, env.replica_seeds(43, 1000))
