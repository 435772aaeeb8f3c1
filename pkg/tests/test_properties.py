"""Property-based checks of the structural invariants."""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from rwre import chaos, dshe, env, kpoint, oracle, qkernel

SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])

seeds = st.integers(min_value=0, max_value=2 ** 63 - 1)
laws = st.one_of(
    st.builds(lambda a: ("two-point", {"a": a}), st.floats(0.0, 0.5)),
    st.builds(lambda al: ("beta", {"alpha": al}), st.floats(0.2, 5.0)),
    st.sampled_from([("degenerate-half", None), ("bernoulli-half", None), ("uniform", None)]),
)
finite_laws = st.one_of(
    st.builds(lambda a: ("two-point", {"a": a}), st.floats(0.0, 0.49)),
    st.just(("degenerate-half", None)),
)


@SETTINGS
@given(law=laws, seed=seeds, T=st.integers(0, 300))
def test_density_mass_and_parity(law, seed, T):
    e = env.Environment(seed, env.make_spec(*law))
    d = qkernel.evolve_density(e, T)[-1]
    assert np.all(d.P >= 0)
    assert math.fsum(d.P) == pytest.approx(1.0, abs=1e-12)
    assert np.all((d.y + T) % 2 == 0)
    assert d.full()[1::2].sum() == 0.0


@SETTINGS
@given(law=laws)
def test_moment_table_pascal(law):
    # x^b (1-x)^c = x^{b+1} (1-x)^c + x^b (1-x)^{c+1}
    m = env.make_spec(*law).moments
    K = m.shape[0] - 1
    assert m[0, 0] == pytest.approx(1.0, abs=1e-14)
    for b in range(K):
        for c in range(K - b):
            assert m[b, c] == pytest.approx(m[b + 1, c] + m[b, c + 1], abs=1e-13)


@SETTINGS
@given(law=laws, seed=seeds, t=st.integers(0, 10 ** 6), x=st.integers(-10 ** 6, 10 ** 6))
def test_weight_determinism(law, seed, t, x):
    spec = env.make_spec(*law)
    w = env.Environment(seed, spec).weight(t, x)
    assert w == env.Environment(seed, spec).weight(t, x)
    assert 0.0 <= w <= 1.0
    g = env.Environment(seed, spec).grid(t, t + 2, x - 1, x + 2)
    assert g[0, 1] == w


@SETTINGS
@given(law=laws, seed=seeds, T=st.integers(1, 200))
def test_tail_monotone(law, seed, T):
    P = qkernel.evolve_density(env.Environment(seed, env.make_spec(*law)), T)[-1].P
    tail = qkernel.tail_probabilities(P)
    assert np.all(np.diff(tail) <= 1e-15)
    assert tail[0] == pytest.approx(1.0, abs=1e-12)
    assert tail[-1] == P[-1]


@SETTINGS
@given(law=laws, seed=seeds, N=st.sampled_from([16, 64, 256]), T=st.integers(1, 120))
def test_tilted_equals_tilt_times_raw(law, seed, N, T):
    e = env.Environment(seed, env.make_spec(*law))
    run = dshe.DiscreteSheRun(e, N, T)
    raw = qkernel.evolve_density(e, T)
    for r in (0, T // 2, T):
        want = np.exp(qkernel.log_tilt(N, r, raw[r].y)) * raw[r].P
        assert np.allclose(run.W(r), want, rtol=1e-9, atol=1e-300)


@settings(max_examples=25, deadline=None)
@given(law=laws, seed=seeds, n=st.integers(0, 6), data=st.data())
def test_chaos_reconstruction(law, seed, n, data):
    e = env.Environment(seed, env.make_spec(*law))
    j = data.draw(st.integers(0, n))
    y = 2 * j - n
    p = qkernel.evolve_density(e, n)[n].P[j]
    assert chaos.reconstruct(e, n, y) == pytest.approx(p, abs=1e-12)


@SETTINGS
@given(law=finite_laws, x0=st.integers(-3, 3), gap=st.integers(0, 3))
def test_tanaka_increment_mean_zero(law, x0, gap):
    spec = env.make_spec(*law)
    coef = 4 * (spec.mu * (1 - spec.mu) - spec.sigma2)

    def inc(old, new):
        return coef * float(old[0] == old[1]) - (abs(new[0] - new[1]) - abs(old[0] - old[1]))

    pos = (x0, x0 + 2 * gap)
    assert oracle.exact_conditional_mean(spec, pos, inc) == pytest.approx(0.0, abs=1e-14)


@settings(max_examples=15, deadline=None)
@given(law=finite_laws, lam=st.floats(-0.8, 0.8),
       start=st.sampled_from([(0,), (0, 0), (0, 2), (0, 0, 2)]), r=st.integers(1, 3))
def test_exp_martingale_mean_one(law, lam, start, r):
    spec = env.make_spec(*law)
    task = oracle.EnumerationTask(spec, start, r,
                                  lambda p: math.exp(kpoint.exp_martingale(p, lam, spec)[-1]))
    assert oracle.exact_expectation(task) == pytest.approx(1.0, abs=1e-10)
