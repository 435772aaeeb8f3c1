"""k-point motions sharing one environment, their intersection functionals,
tilting martingales and the change-of-measure ledger.

Walkers that sit on the same site form a cluster.  Each cluster uses one
weight w and every walker in it steps +1 with probability w, independently
given w.  Under the annealed law w is drawn fresh (every space-time site is
visited at most once per step), so a specific pattern with b up-moves in a
cluster of size n has probability m[b, n - b].
"""

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .env import rho, skewed_spec
from .qkernel import log_cosh


@dataclass
class KPointState:
    """Positions of k walkers plus their pairwise coincidence counters.

    ``V[i, j]`` counts the earlier steps s < r with R^i(s) = R^j(s);
    ``distinct`` holds the number of distinct occupied sites at each s < r.
    """

    r: int
    pos: np.ndarray
    V: np.ndarray
    distinct: list = field(default_factory=list)

    @classmethod
    def start(cls, positions):
        pos = np.asarray(positions, dtype=np.int64)
        if len(set(int(p) % 2 for p in pos)) > 1:
            raise ValueError("starting positions must share parity")
        k = len(pos)
        return cls(0, pos.copy(), np.zeros((k, k), dtype=np.int64), [])

    @property
    def k(self):
        return len(self.pos)

    def clusters(self):
        """Clusters of coinciding walkers as (site, indices) sorted by site."""
        groups = {}
        for i, p in enumerate(self.pos):
            groups.setdefault(int(p), []).append(i)
        return sorted(groups.items())

    def partition(self):
        return [tuple(ix) for _, ix in self.clusters()]

    def n_distinct(self):
        return len(set(int(p) for p in self.pos))


def cluster_sizes(positions):
    _, counts = np.unique(np.asarray(positions), return_counts=True)
    return counts


def advance(state, moves):
    """State after applying the given +-1 moves."""
    moves = np.asarray(moves, dtype=np.int64)
    same = state.pos[:, None] == state.pos[None, :]
    return KPointState(state.r + 1, state.pos + moves, state.V + same,
                       state.distinct + [state.n_distinct()])


def step(state, mode, source, gen):
    """One step of the k-point motion.

    Parameters
    ----------
    mode : {"annealed", "quenched"}
        Annealed draws a fresh cluster weight from the ``source`` EnvSpec;
        quenched reads ``source.weight(r, site)`` from an Environment.
    gen : numpy.random.Generator
        Source of the move coins (and of annealed weights).
    """
    moves = np.empty(state.k, dtype=np.int64)
    for site, ix in state.clusters():
        if mode == "annealed":
            w = draw_weight(source, gen)
        elif mode == "quenched":
            w = source.weight(state.r, site)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        coins = gen.random(len(ix)) < w
        moves[ix] = np.where(coins, 1, -1)
    return advance(state, moves)


def draw_weight(spec, gen, size=None):
    """Sample weights from an EnvSpec (shift and clipping applied)."""
    if spec.kind == "beta":
        w = gen.beta(spec.param, spec.param, size=size)
        return np.minimum(1.0, w + spec.shift) if spec.shift else w
    pts, probs = spec.atoms()
    return pts[gen.choice(len(pts), size=size, p=probs)]


def simulate_path(positions, steps, mode, source, seed):
    """Positions over time, shape (steps + 1, k)."""
    gen = np.random.default_rng(seed)
    state = KPointState.start(positions)
    out = [state.pos.copy()]
    for _ in range(steps):
        state = step(state, mode, source, gen)
        out.append(state.pos.copy())
    return np.array(out)


def state_at(path, r):
    """Rebuild the KPointState at time r from a position path."""
    state = KPointState.start(path[0])
    for s in range(r):
        state = advance(state, path[s + 1] - path[s])
    return state


def sample_one_step(positions, spec, n, seed):
    """n independent one-step displacement vectors under the annealed law."""
    gen = np.random.default_rng(seed)
    pos = np.asarray(positions)
    out = np.empty((n, len(pos)), dtype=np.int64)
    for site in np.unique(pos):
        ix = np.flatnonzero(pos == site)
        w = draw_weight(spec, gen, size=n)
        coins = gen.random((n, len(ix))) < w[:, None]
        out[:, ix] = np.where(coins, 1, -1)
    return out


def one_step_law(positions, spec):
    """Exact law of the displacement vector from the cluster moment table."""
    pos = np.asarray(positions)
    law = {}
    for moves in product((-1, 1), repeat=len(pos)):
        p = 1.0
        mv = np.array(moves)
        for site in np.unique(pos):
            sel = mv[pos == site]
            b = int(np.sum(sel == 1))
            p *= spec.moments[b, len(sel) - b]
        law[moves] = p
    return law


def tanaka(state, i, j, spec):
    """Discrete Tanaka martingale 4[mu(1-mu) - sigma^2] V^{ij} - |R^i - R^j|."""
    coef = 4.0 * (spec.mu * (1.0 - spec.mu) - spec.sigma2)
    return coef * state.V[i, j] - abs(int(state.pos[i]) - int(state.pos[j]))


def cluster_log_mgf(n, lam, spec):
    """log sum_b C(n, b) m[b, n-b] e^{lam (2b - n)}."""
    if n > spec.kmax:
        raise ValueError(f"cluster of size {n} exceeds the moment table (kmax={spec.kmax})")
    s = sum(math.comb(n, b) * spec.moments[b, n - b] * math.exp(lam * (2 * b - n))
            for b in range(n + 1))
    return math.log(s)


def f_lambda(positions, lam, spec):
    """One-step log-MGF of lam * sum of displacements, factorized over clusters."""
    return sum(cluster_log_mgf(int(n), lam, spec) for n in cluster_sizes(positions))


def g_fn(lam, sigma2):
    """log(((1+4s)/2) cosh 2lam + (1-4s)/2) - 2 log cosh lam."""
    if not 0.0 <= sigma2 <= 0.25:
        raise ValueError("sigma2 must lie in [0, 1/4]")
    # ((1+4s)/2) cosh 2l + (1-4s)/2 = cosh^2 l + 4 s sinh^2 l
    sh = math.sinh(lam)
    return math.log1p(4.0 * sigma2 * sh * sh / math.cosh(lam) ** 2)


def exp_martingale(path, lam, spec):
    """log m^lam(r) = lam sum_j (R^j(r) - R^j(0)) - sum_{l<r} f_l, for every r."""
    path = np.asarray(path)
    out = np.zeros(len(path))
    acc = 0.0
    for r in range(1, len(path)):
        acc += f_lambda(path[r - 1], lam, spec)
        out[r] = lam * float(np.sum(path[r] - path[0])) - acc
    return out


@dataclass
class MartingaleLedger:
    """Per-step change-of-measure quantities along one path (index = time)."""

    log_m: np.ndarray
    H: np.ndarray
    D: np.ndarray
    D_comp: np.ndarray
    G: np.ndarray
    W: np.ndarray
    G_tilde: np.ndarray
    distinct: np.ndarray
    colliding_pairs: np.ndarray
    c_bound: float


def _cluster_patterns(pos, new):
    """(n, b) for each cluster at the previous positions."""
    out = []
    for site in np.unique(pos):
        sel = pos == site
        n = int(np.sum(sel))
        b = int(np.sum(new[sel] - pos[sel] == 1))
        out.append((n, b))
    return out


def girsanov_ledger(path, N, spec, skewed=None):
    """Change-of-measure ledger between the law ``spec`` and its skew at level N.

    Increments per step, over clusters (n_j, b_j):
      D: sum_j log(m_spec[b_j, n_j-b_j] / m_skew[b_j, n_j-b_j])
      H: N^{-1/4} sum_i (dR^i - (2 mu_skew - 1))
      G = H + (D - E_skew[D]);  W = sum log E_skew[e^{dG}];  G_tilde = G - W.
    """
    path = np.asarray(path)
    skewed = skewed_spec(spec, N) if skewed is None else skewed
    lam = float(N) ** -0.25
    drift = 2.0 * skewed.mu - 1.0
    m0, m1 = spec.moments, skewed.moments
    steps = len(path) - 1
    H = np.zeros(steps + 1)
    D = np.zeros(steps + 1)
    Dc = np.zeros(steps + 1)
    W = np.zeros(steps + 1)
    distinct = np.zeros(steps, dtype=np.int64)
    pairs = np.zeros(steps, dtype=np.int64)
    for r in range(steps):
        pos, new = path[r], path[r + 1]
        dH = lam * float(np.sum(new - pos) - len(pos) * drift)
        dD = 0.0
        dDmean = 0.0
        log_e = 0.0
        for n, b in _cluster_patterns(pos, new):
            if n > spec.kmax:
                raise ValueError(f"cluster of size {n} exceeds the moment table")
            dD += math.log(m0[b, n - b] / m1[b, n - b])
            mean = 0.0
            for bb in range(n + 1):
                if m1[bb, n - bb] > 0:
                    mean += math.comb(n, bb) * m1[bb, n - bb] * math.log(m0[bb, n - bb] / m1[bb, n - bb])
            dDmean += mean
            # E_skew[e^{dG}] factorizes over clusters
            e = 0.0
            for bb in range(n + 1):
                if m1[bb, n - bb] > 0:
                    lr = math.log(m0[bb, n - bb] / m1[bb, n - bb]) - mean
                    e += math.comb(n, bb) * m1[bb, n - bb] * math.exp(
                        lr + lam * ((2 * bb - n) - n * drift))
            log_e += math.log(e)
        H[r + 1] = H[r] + dH
        D[r + 1] = D[r] + dD
        Dc[r + 1] = Dc[r] + dD - dDmean
        W[r + 1] = W[r] + log_e
        distinct[r] = len(np.unique(pos))
        _, counts = np.unique(pos, return_counts=True)
        pairs[r] = int(np.sum(counts * (counts - 1) // 2))
    G = H + Dc
    dG = np.diff(G)
    coll = pairs > 0
    c_bound = float(np.max(dG[coll] ** 2) * math.sqrt(N)) if np.any(coll) else 0.0
    return MartingaleLedger(exp_martingale(path, lam, spec), H, D, Dc, G, W, G - W,
                            distinct, pairs, c_bound)


def rescaled(path, N, t, mu=0.5):
    """(X_N(t), V_N(t), T_N(t)) with linear interpolation between lattice times.

    X_N = (R(Nt) - (2mu - 1) Nt) / sqrt(N) per walker, V_N = V(Nt) / sqrt(N)
    per pair, T_N = #{s < Nt : at most k - 2 distinct sites} / sqrt(N).
    """
    path = np.asarray(path)
    k = path.shape[1]
    s = t * N
    r0 = int(math.floor(s + 1e-9))
    frac = s - r0

    def at(r):
        st = state_at(path, r)
        X = (st.pos - (2 * mu - 1) * r) / math.sqrt(N)
        V = st.V / math.sqrt(N)
        T = sum(1 for v in st.distinct if v <= k - 2) / math.sqrt(N)
        return X, V, T

    a = at(r0)
    if frac < 1e-9:
        return a
    b = at(r0 + 1)
    return tuple((1 - frac) * x + frac * y for x, y in zip(a, b))


def annealed_cluster_log_weights(spec, N, kmax):
    """c[n, b] = log m_spec[b, n-b] - log m_skew[b, n-b] + lam (2b - n) - n log cosh lam.

    The product of exp(c) over clusters and steps turns a k-point path drawn
    under the skewed law into a sample of prod_i C(R^i) under the original law.
    """
    sk = skewed_spec(spec, N)
    lam = float(N) ** -0.25
    lc = log_cosh(lam)
    c = np.full((kmax + 1, kmax + 1), -np.inf)
    for n in range(1, kmax + 1):
        for b in range(n + 1):
            if sk.moments[b, n - b] > 0 and spec.moments[b, n - b] > 0:
                c[n, b] = (math.log(spec.moments[b, n - b]) - math.log(sk.moments[b, n - b])
                           + lam * (2 * b - n) - n * lc)
    return c, sk


__all__ = [
    "KPointState", "advance", "step", "draw_weight", "simulate_path", "state_at",
    "sample_one_step", "one_step_law", "tanaka", "cluster_log_mgf", "f_lambda", "g_fn",
    "exp_martingale", "MartingaleLedger", "girsanov_ledger", "rescaled",
    "annealed_cluster_log_weights", "rho",
]
