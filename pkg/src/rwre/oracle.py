"""Exact enumeration over weights and move patterns at tiny sizes.

Only finite-support weight laws enter.  Path expectations sum, at every step,
over the weight atoms of each occupied site and over all move patterns, so the
result never touches the moment tables used by the simulators.
"""

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

MAX_K = 3
MAX_STEPS = 4


@dataclass(frozen=True)
class EnumerationTask:
    """k walkers from ``start`` run for ``steps`` steps under a finite-support law.

    ``functional`` maps a position path of shape (steps + 1, k) to a float.
    """

    spec: object
    start: tuple
    steps: int
    functional: object

    def check(self):
        if not self.spec.finite_support:
            raise ValueError("enumeration needs a finite-support weight law")
        if len(self.start) > MAX_K or self.steps > MAX_STEPS:
            raise ValueError(f"enumeration capped at k <= {MAX_K}, steps <= {MAX_STEPS}")


def _step_law(pos, atoms, probs):
    """Exact law of the next positions, summing over the atoms at each occupied site."""
    sites = sorted(set(pos))
    k = len(pos)
    out = []
    for moves in product((-1, 1), repeat=k):
        p = 1.0
        for s in sites:
            ix = [i for i in range(k) if pos[i] == s]
            b = sum(1 for i in ix if moves[i] == 1)
            n = len(ix)
            p *= sum(q * w ** b * (1.0 - w) ** (n - b) for w, q in zip(atoms, probs))
        if p > 0.0:
            out.append((tuple(pos[i] + moves[i] for i in range(k)), p))
    return out


def path_law(spec, start, steps):
    """All position paths with their probabilities, as (paths, probs)."""
    atoms, probs = spec.atoms()
    paths = [((tuple(start),), 1.0)]
    for _ in range(steps):
        nxt = []
        for path, p in paths:
            for new, q in _step_law(path[-1], atoms, probs):
                nxt.append((path + (new,), p * q))
        paths = nxt
    arr = np.array([np.array(pth) for pth, _ in paths])
    return arr, np.array([p for _, p in paths])


def exact_expectation(task):
    """Exact expectation of task.functional over the annealed k-point law."""
    task.check()
    paths, probs = path_law(task.spec, task.start, task.steps)
    vals = np.array([task.functional(pth) for pth in paths])
    return float(np.sum(probs * vals))


def total_mass(task):
    task.check()
    _, probs = path_law(task.spec, task.start, task.steps)
    return float(math.fsum(probs))


def exact_conditional_mean(spec, positions, increment):
    """E[increment(old, new) | positions] over one step."""
    if not spec.finite_support:
        raise ValueError("enumeration needs a finite-support weight law")
    atoms, probs = spec.atoms()
    pos = tuple(int(p) for p in positions)
    return float(math.fsum(p * increment(np.array(pos), np.array(new))
                           for new, p in _step_law(pos, atoms, probs)))


def cone_sites(T):
    """Space-time sites (t, y) with 0 <= t < T, |y| <= t, y = t mod 2."""
    return [(t, y) for t in range(T) for y in range(-t, t + 1, 2)]


def enumerate_environments(spec, T):
    """Every weight assignment on the cone visited by T steps, with its probability."""
    if not spec.finite_support:
        raise ValueError("enumeration needs a finite-support weight law")
    sites = cone_sites(T)
    if len(sites) > 10:
        raise ValueError("cone too large for enumeration")
    atoms, probs = spec.atoms()
    for choice in product(range(len(atoms)), repeat=len(sites)):
        p = 1.0
        w = {}
        for s, c in zip(sites, choice):
            p *= probs[c]
            w[s] = atoms[c]
        yield w, p


def tilted_density_from_weights(weights, N, T):
    """Tilted density rows W(t, .) for t = 0..T, indexed by y + t // 2 steps of 2."""
    r = 1.0 / (1.0 + math.exp(-2.0 * float(N) ** -0.25))
    rows = [{0: 1.0}]
    for t in range(T):
        nxt = {}
        for y, val in rows[-1].items():
            w = weights[(t, y)]
            nxt[y + 1] = nxt.get(y + 1, 0.0) + 2.0 * r * w * val
            nxt[y - 1] = nxt.get(y - 1, 0.0) + 2.0 * (1.0 - r) * (1.0 - w) * val
        rows.append(nxt)
    return rows


def field_moment_by_environments(spec, N, steps, phi, k):
    """E[U_N(steps/N, phi)^k] from the tilted DP run on every cone environment."""
    lam = float(N) ** -0.25
    total = 0.0
    for w, p in enumerate_environments(spec, steps):
        row = tilted_density_from_weights(w, N, steps)[-1]
        u = sum(val * float(phi((y - lam * steps) / math.sqrt(N))) for y, val in row.items())
        total += p * u ** k
    return total


def field_moment_by_paths(spec, N, steps, phi, k):
    """E[U_N(steps/N, phi)^k] as the annealed k-point expectation of prod C phi."""
    lam = float(N) ** -0.25
    lc = math.log(math.cosh(lam))

    def functional(path):
        y = path[-1]
        c = np.exp(lam * y - steps * lc)
        return float(np.prod(c * phi((y - lam * steps) / math.sqrt(N))))

    return exact_expectation(EnumerationTask(spec, (0,) * k, steps, functional))
