"""Exact enumeration oracle."""

import math
from collections import Counter

import numpy as np
import pytest

from rwre import chaos, env, kpoint, oracle
from rwre.testfn import TestFunction

LAWS = [("two-point", {"a": 0.25}), ("two-point", {"a": 0.4}), ("degenerate-half", None),
        ("bernoulli-half", None)]


@pytest.mark.parametrize("kind, params", LAWS)
@pytest.mark.parametrize("start, steps", [((0,), 4), ((0, 0), 3), ((0, 2), 4), ((0, 0, 0), 2), ((-1, 1, 1), 3)])
def test_total_mass(kind, params, start, steps):
    task = oracle.EnumerationTask(env.make_spec(kind, params), start, steps, lambda p: 0.0)
    assert oracle.total_mass(task) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("kind, params", LAWS)
def test_single_walker_is_simple_random_walk(kind, params):
    spec = env.make_spec(kind, params)
    paths, probs = oracle.path_law(spec, (0,), 4)
    for y in range(-4, 5, 2):
        p = probs[paths[:, -1, 0] == y].sum()
        assert p == pytest.approx(chaos.srw_kernel(4, y), abs=1e-15)


@pytest.mark.parametrize("N", [4, 16])
def test_skewed_single_walker_is_binomial(N, two_point):
    sk = env.skewed_spec(two_point, N)
    r = env.rho(N)
    paths, probs = oracle.path_law(sk, (0,), 4)
    for j in range(5):
        p = probs[paths[:, -1, 0] == 2 * j - 4].sum()
        assert p == pytest.approx(math.comb(4, j) * r ** j * (1 - r) ** (4 - j), abs=1e-14)


def test_two_walkers_same_site_law(two_point):
    # one step from a shared site: both up with probability E[w^2]
    paths, probs = oracle.path_law(two_point, (0, 0), 1)
    ends = {tuple(p[-1]): q for p, q in zip(paths, probs)}
    assert ends[(1, 1)] == pytest.approx(0.25 + 0.25 ** 2, abs=1e-15)
    assert ends[(1, -1)] == pytest.approx(0.25 - 0.25 ** 2, abs=1e-15)


@pytest.mark.parametrize("lam", [0.3, -0.5])
def test_exponential_moment_apart_walkers(lam, two_point):
    # walkers at distance 4 cannot meet in one step, so the moment factorises
    task = oracle.EnumerationTask(two_point, (0, 4), 1, lambda p: math.exp(lam * p[-1].sum()))
    assert oracle.exact_expectation(task) == pytest.approx(math.exp(4 * lam) * math.cosh(lam) ** 2, rel=1e-14)


@pytest.mark.parametrize("lam", [0.3, -0.5])
def test_exponential_moment_shared_site(lam, two_point):
    # one step from a shared site: E[(w e^lam + (1 - w) e^-lam)^2]
    task = oracle.EnumerationTask(two_point, (0, 0), 1, lambda p: math.exp(lam * p[-1].sum()))
    atoms, probs = two_point.atoms()
    expected = sum(q * (w * math.exp(lam) + (1 - w) * math.exp(-lam)) ** 2 for w, q in zip(atoms, probs))
    assert oracle.exact_expectation(task) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("k, steps", [(1, 3), (2, 3), (3, 2)])
@pytest.mark.parametrize("phi", [TestFunction.gaussian(0.0, 1.0), TestFunction.bump(0.3, 1.5)])
def test_field_moment_two_routes(k, steps, phi, two_point):
    a = oracle.field_moment_by_environments(two_point, 4, steps, phi, k)
    b = oracle.field_moment_by_paths(two_point, 4, steps, phi, k)
    assert a == pytest.approx(b, rel=1e-12)


def test_tilted_density_mass():
    spec = env.make_spec("two-point", {"a": 0.25})
    for w, p in oracle.enumerate_environments(spec, 3):
        rows = oracle.tilted_density_from_weights(w, 4, 3)
        assert rows[0] == {0: 1.0}
        assert all(all(v >= 0 for v in row.values()) for row in rows)
    # averaged over environments the tilted mass is one
    mean = sum(p * sum(oracle.tilted_density_from_weights(w, 4, 3)[-1].values())
               for w, p in oracle.enumerate_environments(spec, 3))
    assert mean == pytest.approx(1.0, abs=1e-14)


def test_enumerated_environment_probabilities_sum_to_one():
    spec = env.make_spec("two-point", {"a": 0.1})
    assert math.fsum(p for _, p in oracle.enumerate_environments(spec, 3)) == pytest.approx(1.0, abs=1e-15)
    assert len(oracle.cone_sites(3)) == 6


def test_conditional_mean_of_displacement(two_point):
    inc = lambda old, new: float((new - old).sum())
    assert oracle.exact_conditional_mean(two_point, (0, 0), inc) == pytest.approx(0.0, abs=1e-15)
    sk = env.skewed_spec(two_point, 16)
    assert oracle.exact_conditional_mean(sk, (0, 3), inc) == pytest.approx(2 * (2 * env.rho(16) - 1), abs=1e-14)


@pytest.mark.parametrize("start, steps", [((0, 0), 3), ((0, 2, 2), 2)])
def test_simulator_matches_exact_law(start, steps, two_point):
    paths, probs = oracle.path_law(two_point, start, steps)
    exact = Counter()
    for p, q in zip(paths, probs):
        exact[tuple(p[-1])] += q
    n = 40000
    gen_seeds = np.random.SeedSequence(17).generate_state(n)
    counts = Counter(tuple(kpoint.simulate_path(start, steps, "annealed", two_point, int(s))[-1])
                     for s in gen_seeds)
    assert set(counts) <= set(exact)
    for key, p in exact.items():
        se = math.sqrt(p * (1 - p) / n)
        assert abs(counts[key] / n - p) < 4 * se + 1e-12


def test_guards():
    with pytest.raises(ValueError):
        oracle.EnumerationTask(env.make_spec("uniform"), (0,), 2, lambda p: 0.0).check()
    with pytest.raises(ValueError):
        oracle.EnumerationTask(env.make_spec("two-point", {"a": 0.1}), (0,) * 4, 2, lambda p: 0.0).check()
    with pytest.raises(ValueError):
        oracle.EnumerationTask(env.make_spec("two-point", {"a": 0.1}), (0,), 5, lambda p: 0.0).check()
    with pytest.raises(ValueError):
        list(oracle.enumerate_environments(env.make_spec("two-point", {"a": 0.1}), 5))
    with pytest.raises(ValueError):
        oracle.exact_conditional_mean(env.make_spec("uniform"), (0,), lambda a, b: 0.0)
