"""Experiment configuration, runners, result records and persistence.

Every runner takes an ``ExperimentConfig`` and returns a ``RunResult``: a list
of ``ResultRecord`` rows (each with its gate) plus plot-ready tables.  Replica
i of a stage always uses ``replica_seed(stage_seed, i)`` and reductions run in
replica order, so outputs do not depend on the thread count.
"""

import csv
import hashlib
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field, fields
from itertools import combinations
from pathlib import Path

import numpy as np
import yaml
from scipy import stats

from . import __version__, chaos, dshe, env, kpoint, mc, oracle, qkernel, sheref
from .testfn import SpaceTimeGaussian, TestFunction

SCHEMA_VERSION = 1
EXPERIMENTS = ("density", "moments", "qmf", "chaos", "extremes", "noise", "identities")
DEFAULT_TOLERANCES = {
    "exact": 1e-10,      # generic floating-point identity
    "mass": 1e-12,       # DP mass conservation
    "tilt": 1e-9,        # tilted vs raw density (relative)
    "stencil": 1e-12,    # heat operator vs weight stencil
    "cross_se": 3.0,     # SE multiplier for cross-validation gates
    "dist_se": 4.0,      # SE multiplier for distributional / martingale-mean gates
}
RECORD_COLUMNS = ("experiment", "kind", "inputs", "statistic", "value", "se", "tolerance",
                  "target", "gate", "passed", "version")


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    """Everything that determines an experiment's output.

    ``options`` holds experiment-specific settings (documented per runner);
    ``budget_seconds`` caps Monte Carlo time, after which results are flagged
    partial.
    """

    experiment: str
    law: str = "uniform"
    law_params: dict = field(default_factory=dict)
    N: list = field(default_factory=lambda: [1024])
    t: list = field(default_factory=lambda: [1.0])
    test_functions: list = field(default_factory=lambda: [{"kind": "gaussian", "a": 0.0, "eps": 1.0}])
    replicas: int = 1000
    seed: int = 0
    threads: int = 1
    out: str = "results"
    tolerances: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    budget_seconds: float = None
    schema: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.schema != SCHEMA_VERSION:
            raise ValueError(f"config schema {self.schema} is not supported (expected {SCHEMA_VERSION})")
        self.N = [int(n) for n in _as_list(self.N)]
        self.t = [float(x) for x in _as_list(self.t)]
        if not self.N or any(n < 1 for n in self.N):
            raise ValueError("N must be a non-empty list of positive integers")
        if not self.t or any(x <= 0 for x in self.t):
            raise ValueError("t must be a non-empty list of positive times")
        if int(self.replicas) < 1:
            raise ValueError("replicas must be positive")
        if int(self.threads) < 1:
            raise ValueError("threads must be positive")
        self.replicas = int(self.replicas)
        self.threads = int(self.threads)
        self.seed = int(self.seed)
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ValueError(f"unknown tolerance keys {sorted(unknown)}")
        self.spec()
        self.phis()

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ValueError("config must be a mapping")
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        if "experiment" not in d:
            raise ValueError("config needs an 'experiment' key")
        return cls(**d)

    def to_dict(self):
        return asdict(self)

    def digest(self):
        """sha256 of the output-determining fields (thread count and out dir excluded)."""
        d = {k: v for k, v in self.to_dict().items() if k not in ("threads", "out")}
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()

    def spec(self):
        return env.make_spec(self.law, self.law_params)

    def phis(self):
        return [TestFunction.from_dict(d) for d in self.test_functions]

    def tol(self, key):
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    def opt(self, key, default=None):
        return self.options.get(key, default)


def _as_list(x):
    return list(x) if isinstance(x, (list, tuple)) else [x]


def load_config(path, **overrides):
    """Read a YAML config; ``overrides`` (seed, threads, out) replace file values."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        d = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ValueError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ValueError(f"{path} must contain a mapping")
    d.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(d)


# ---------------------------------------------------------------------------
# records


@dataclass
class ResultRecord:
    """One statistic with its gate.

    ``kind`` is ``exact`` (carries a tolerance) or ``statistical`` (carries an
    SE).  ``passed`` is None for diagnostics that have no gate.
    """

    experiment: str
    kind: str
    inputs: str
    statistic: str
    value: float
    se: float = None
    tolerance: float = None
    target: float = None
    gate: str = "diagnostic"
    passed: bool = None
    version: str = ""
    wall_time: float = 0.0

    def __post_init__(self):
        if self.kind == "exact" and self.tolerance is None:
            raise ValueError("exact records need a tolerance")
        if self.kind == "statistical" and self.se is None:
            raise ValueError("statistical records need an SE")
        if self.kind not in ("exact", "statistical"):
            raise ValueError(f"unknown record kind {self.kind!r}")

    def row(self):
        return [self.experiment, self.kind, self.inputs, self.statistic, _fmt(self.value),
                _fmt(self.se), _fmt(self.tolerance), _fmt(self.target), self.gate,
                "" if self.passed is None else ("PASS" if self.passed else "FAIL"), self.version]


@dataclass
class RunResult:
    experiment: str
    records: list
    tables: dict = field(default_factory=dict)
    partial: bool = False
    wall_time: float = 0.0

    @property
    def ok(self):
        return all(r.passed is not False for r in self.records)

    def failures(self):
        return [r for r in self.records if r.passed is False]


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _inputs(**kw):
    parts = []
    for k, v in kw.items():
        if isinstance(v, float):
            v = repr(v)
        parts.append(f"{k}={v}")
    return ";".join(parts)


class _Recorder:
    """Collects records for one experiment, stamping version and wall time."""

    def __init__(self, experiment):
        self.experiment = experiment
        self.records = []
        self.version = version_stamp()
        self._t = time.perf_counter()

    def _add(self, **kw):
        now = time.perf_counter()
        rec = ResultRecord(self.experiment, version=self.version, wall_time=now - self._t, **kw)
        self._t = now
        self.records.append(rec)
        return rec

    def exact(self, inputs, statistic, value, target, tol, relative=False):
        """|value - target| <= tol (relative to |target| when ``relative``)."""
        err = abs(value - target)
        scale = abs(target) if relative and target != 0 else 1.0
        gate = f"|value-target|{'/|target|' if relative else ''} <= tol"
        return self._add(kind="exact", inputs=inputs, statistic=statistic, value=value,
                         tolerance=tol, target=target, gate=gate, passed=bool(err <= tol * scale))

    def bound(self, inputs, statistic, value, limit, tol=0.0):
        """value <= limit (+ tol)."""
        return self._add(kind="exact", inputs=inputs, statistic=statistic, value=value,
                         tolerance=tol, target=limit, gate="value <= target",
                         passed=bool(value <= limit + tol))

    def close(self, inputs, statistic, value, se, target, target_se=0.0, mult=3.0):
        """|value - target| <= mult * sqrt(se^2 + target_se^2)."""
        comb = math.hypot(se, target_se)
        return self._add(kind="statistical", inputs=inputs, statistic=statistic, value=value,
                         se=comb, target=target, gate=f"|value-target| <= {mult:g} SE",
                         passed=bool(abs(value - target) <= mult * comb))

    def apart(self, inputs, statistic, value, se, target, target_se=0.0, mult=3.0):
        """|value - target| > mult * sqrt(se^2 + target_se^2)."""
        comb = math.hypot(se, target_se)
        return self._add(kind="statistical", inputs=inputs, statistic=statistic, value=value,
                         se=comb, target=target, gate=f"|value-target| > {mult:g} SE",
                         passed=bool(abs(value - target) > mult * comb))

    def above(self, inputs, statistic, value, se, mult=3.0):
        """value >= mult * se (a positive effect resolved at mult SE)."""
        return self._add(kind="statistical", inputs=inputs, statistic=statistic, value=value,
                         se=se, target=0.0, gate=f"value >= {mult:g} SE",
                         passed=bool(value >= mult * se))

    def within(self, inputs, statistic, value, se, lo, hi):
        return self._add(kind="statistical", inputs=inputs, statistic=statistic, value=value,
                         se=se, target=0.5 * (lo + hi), gate=f"{lo:g} <= value <= {hi:g}",
                         passed=bool(lo <= value <= hi))

    def flag(self, inputs, statistic, value, se, passed, gate):
        """Statistical record whose pass/fail is decided by the caller."""
        return self._add(kind="statistical", inputs=inputs, statistic=statistic, value=value,
                         se=se, gate=gate, passed=bool(passed))

    def diag(self, inputs, statistic, value, se=None, tolerance=None, target=None):
        kind = "statistical" if se is not None else "exact"
        if kind == "exact" and tolerance is None:
            tolerance = 0.0
        return self._add(kind=kind, inputs=inputs, statistic=statistic, value=value, se=se,
                         tolerance=tolerance, target=target, gate="diagnostic", passed=None)


def version_stamp():
    """Package version plus a short hash of the installed sources."""
    h = hashlib.sha256()
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return f"{__version__}+g{h.hexdigest()[:10]}"


# ---------------------------------------------------------------------------
# persistence


def write_records(records, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow(r.row())


def write_table(header, rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def read_records(path):
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def save_result(result, cfg, out=None):
    """Write <exp>.csv, <exp>_<table>.csv and <exp>.json; returns the paths."""
    out = Path(out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{result.experiment}.csv"]
    write_records(result.records, paths[0])
    for name, (header, rows) in sorted(result.tables.items()):
        p = out / f"{result.experiment}_{name}.csv"
        write_table(header, rows, p)
        paths.append(p)
    import numba
    import scipy
    meta = {
        "experiment": result.experiment,
        "schema": SCHEMA_VERSION,
        "seed": cfg.seed,
        "threads": cfg.threads,
        "config_sha256": cfg.digest(),
        "config": cfg.to_dict(),
        "version": version_stamp(),
        "versions": {"python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__, "numba": numba.__version__,
                     "pyyaml": yaml.__version__},
        "wall_time_seconds": result.wall_time,
        "partial": result.partial,
        "record_wall_times": [[r.statistic, r.inputs, r.wall_time] for r in result.records],
        "n_pass": sum(r.passed is True for r in result.records),
        "n_fail": sum(r.passed is False for r in result.records),
    }
    p = out / f"{result.experiment}.json"
    p.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
    paths.append(p)
    return paths


def format_table(records):
    """Plain-text pass/fail table."""
    lines = []
    for r in records:
        status = "----" if r.passed is None else ("PASS" if r.passed else "FAIL")
        extra = f"se={r.se:.3g}" if r.se is not None else f"tol={r.tolerance:.3g}"
        tgt = "" if r.target is None else f" target={r.target:.6g}"
        lines.append(f"{status}  {r.statistic:<34s} {r.value:.6g}{tgt} {extra}  [{r.inputs}]")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Monte Carlo plumbing


def stage_seed(seed, *tags):
    """Deterministic 64-bit seed for one stage of an experiment."""
    h = hashlib.sha256(repr((int(seed),) + tags).encode()).digest()
    return int.from_bytes(h[:8], "little")


class _Budget:
    def __init__(self, seconds):
        self.seconds = seconds
        self.t0 = time.perf_counter()
        self.hit = False

    def over(self):
        if self.seconds is None:
            return False
        if time.perf_counter() - self.t0 > self.seconds:
            self.hit = True
        return self.hit


def _chunked(fn, seeds, budget, chunk=5000):
    """Apply ``fn`` to consecutive replica blocks; stop early when over budget.

    The first block always runs.  ``fn`` returns an array or a tuple of arrays
    whose leading axis is the replica.
    """
    parts = []
    for a in range(0, len(seeds), chunk):
        if parts and budget.over():
            break
        parts.append(fn(seeds[a:a + chunk]))
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(parts[0])))
    return np.concatenate(parts)


def mean_se(x):
    x = np.asarray(x, dtype=float)
    n = len(x)
    return float(np.mean(x)), (float(np.std(x, ddof=1)) / math.sqrt(n) if n > 1 else math.inf)


def _args(spec):
    return spec.code, float(spec.param), float(spec.shift)


def _rows(t, N):
    return int(round(t * N))


# ---------------------------------------------------------------------------
# density


def run_density(cfg):
    """Quenched and tilted densities with mass and tilt checks.

    Options: ``seeds`` (environment seeds, default [seed]), ``tail_x``
    (points at which the tail field is tabulated).
    """
    t0 = time.perf_counter()
    rec = _Recorder("density")
    spec = cfg.spec()
    seeds = [int(s) for s in cfg.opt("seeds", [cfg.seed])]
    tail_x = [float(x) for x in cfg.opt("tail_x", [-1.0, -0.5, 0.0, 0.5, 1.0])]
    rows, tails = [], []
    for N in cfg.N:
        for t in cfg.t:
            T = _rows(t, N)
            for s in seeds:
                e = env.Environment(s, spec)
                inp = _inputs(law=spec.describe(), N=N, t=t, seed=s)
                worst, neg = qkernel.mass_defect(e, T)
                rec.exact(inp, "mass_defect", worst, 0.0, cfg.tol("mass"))
                rec.exact(inp, "negative_entries", float(neg), 0.0, 0.0)
                raw = qkernel.evolve_density(e, T)
                til = qkernel.evolve_tilted(e, N, T)
                P, W = raw[T].P, til[T].W
                pred = np.exp(qkernel.log_tilt(N, T, raw[T].y)) * P
                rel = float(np.max(np.abs(W - pred)) / np.max(np.abs(W)))
                rec.exact(inp, "tilted_vs_raw", rel, 0.0, cfg.tol("tilt"))
                u = (raw[T].y - float(N) ** -0.25 * T) / math.sqrt(N)
                for y, uu, p, w in zip(raw[T].y, u, P, W):
                    rows.append((N, t, s, int(y), float(uu), float(p), float(w)))
                for x in tail_x:
                    tails.append((N, t, s, x, qkernel.tail_field(til, N, t, x)))
    tables = {"rows": (("N", "t", "seed", "y", "u", "P", "W"), rows),
              "tail": (("N", "t", "seed", "x", "F"), tails)}
    return RunResult("density", rec.records, tables, False, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# moments


def run_moment_experiment(cfg):
    """E[U_N(t, phi)^k] by DP replicas and by the annealed k-point estimator.

    Options: ``k`` (list of orders, each <= 4, default [1, 2]),
    ``pair_half_width`` (window of the exact two-walker recursion).
    Targets: k = 1 the heat pairing, k = 2 the contour integral (and the naive
    coefficient 8 sigma^2, which must fall outside the band).
    """
    t0 = time.perf_counter()
    rec = _Recorder("moments")
    budget = _Budget(cfg.budget_seconds)
    spec = cfg.spec()
    ks = [int(k) for k in _as_list(cfg.opt("k", [1, 2]))]
    if any(k < 1 or k > 4 for k in ks):
        raise ValueError("moment order k must lie in 1..4")
    mult = cfg.tol("cross_se")
    code, par, shift = _args(spec)
    table = []
    for N in cfg.N:
        T_all = {t: _rows(t, N) for t in cfg.t}
        clog, sk = kpoint.annealed_cluster_log_weights(spec, N, max(max(ks), 2))
        for t, T in T_all.items():
            for phi in cfg.phis():
                base = _inputs(law=spec.describe(), N=N, t=t, phi=phi.label())
                seeds = env.replica_seeds(stage_seed(cfg.seed, "dp", N, t, phi.label()), cfg.replicas)
                U = _chunked(lambda s: mc.mc_pairings(s, code, par, shift, float(N), np.array([T]),
                                                      np.array([phi.code]), phi.params[None, :])[:, 0, 0],
                             seeds, budget)
                if spec.sigma2 == 0.0:
                    ex = mc.first_moment_exact(float(N), T, phi.code, phi.params)
                    rec.exact(base, "zero_variance_sd", float(np.std(U)), 0.0, 0.0)
                    rec.exact(base, "replica_vs_binomial", float(np.max(np.abs(U - ex))), 0.0, 1e-12)
                for k in ks:
                    inp = f"{base};k={k}"
                    aseeds = env.replica_seeds(stage_seed(cfg.seed, "annealed", N, t, phi.label(), k),
                                               cfg.replicas)
                    A = _chunked(lambda s: mc.mc_annealed_moment(s, k, float(N), T, phi.code, phi.params,
                                                                 clog, sk.code, float(sk.param),
                                                                 float(sk.shift)),
                                 aseeds, budget)
                    m_dp, se_dp = mean_se(U ** k)
                    m_an, se_an = mean_se(A)
                    n_dp, n_an = len(U), len(A)
                    rec.diag(f"{inp};replicas={n_dp}", "dp_estimate", m_dp, se=se_dp)
                    rec.diag(f"{inp};replicas={n_an}", "annealed_estimate", m_an, se=se_an)
                    rec.close(inp, "dp_minus_annealed", m_dp - m_an, math.hypot(se_dp, se_an), 0.0,
                              mult=mult)
                    exact = _exact_moment(spec, N, T, phi, k, cfg)
                    if exact is not None:
                        val, lost = exact
                        rec.diag(inp, "exact_finite_N", val, tolerance=max(lost, 1e-13))
                        rec.close(inp, "dp_vs_exact_finite_N", m_dp, se_dp, val, mult=mult)
                        rec.close(inp, "annealed_vs_exact_finite_N", m_an, se_an, val, mult=mult)
                    target = _moment_target(spec, t, phi, k)
                    if target is not None:
                        tv, te = target
                        rec.diag(inp, "continuum_target", tv, tolerance=te)
                        rec.close(inp, "dp_vs_target", m_dp, se_dp, tv, te, mult=mult)
                        rec.close(inp, "annealed_vs_target", m_an, se_an, tv, te, mult=mult)
                        if k == 2 and spec.sigma2 > 0.0:
                            naive = sheref.two_point_paired(t, phi, math.sqrt(8.0 * spec.sigma2))
                            rec.diag(inp, "naive_target", naive.value, tolerance=naive.error)
                            rec.apart(inp, "dp_vs_naive_target", m_dp, se_dp, naive.value, naive.error,
                                      mult=mult)
                            rec.apart(inp, "annealed_vs_naive_target", m_an, se_an, naive.value,
                                      naive.error, mult=mult)
                    table.append((N, t, phi.label(), k, n_dp, m_dp, se_dp, n_an, m_an, se_an,
                                  "" if target is None else target[0],
                                  "" if exact is None else exact[0]))
    header = ("N", "t", "phi", "k", "dp_replicas", "dp_mean", "dp_se", "annealed_replicas",
              "annealed_mean", "annealed_se", "target", "exact_finite_N")
    return RunResult("moments", rec.records, {"estimates": (header, table)}, budget.hit,
                     time.perf_counter() - t0)


def _moment_target(spec, t, phi, k):
    if k == 1:
        return phi.heat_pairing(t), 1e-12
    if k == 2 and spec.sigma2 < 0.25:
        if spec.sigma2 == 0.0:
            v = phi.heat_pairing(t) ** 2
            return v, 1e-12
        ref = sheref.two_point_paired(t, phi, sheref.gamma_coeff(spec.sigma2))
        return ref.value, ref.error
    return None


def _exact_moment(spec, N, T, phi, k, cfg):
    if k == 1:
        return mc.first_moment_exact(float(N), T, phi.code, phi.params), 0.0
    if k == 2:
        H = int(cfg.opt("pair_half_width", int(6 * math.sqrt(T)) + 12))
        return mc.pair_moment_rows(float(N), T, spec.sigma2, phi.code, phi.params, H)
    return None


# ---------------------------------------------------------------------------
# quadratic martingale field


def run_qmf_experiment(cfg):
    """QMF increment regularity and the key-estimate staircase.

    Options: ``modes`` (subset of ["increments", "key_estimate"]);
    increments: ``t_grid`` (increment lengths, s = 0), ``slope_range``;
    key_estimate: ``a``, ``t_key``, ``staircase`` (list of [N, eps]),
    ``key_replicas``.
    """
    t0 = time.perf_counter()
    rec = _Recorder("qmf")
    budget = _Budget(cfg.budget_seconds)
    modes = _as_list(cfg.opt("modes", ["increments", "key_estimate"]))
    tables = {}
    if "increments" in modes:
        tables["increments"] = _qmf_increments(cfg, rec, budget)
    if "key_estimate" in modes:
        tables["key_estimate"] = _key_estimate(cfg, rec, budget)
    return RunResult("qmf", rec.records, tables, budget.hit, time.perf_counter() - t0)


def _qmf_increments(cfg, rec, budget):
    """E[(Q_N(t) - Q_N(s))^2] against t - s with s = 0.

    Row r of Q_N is the predictable increment over [r/N, (r+1)/N), so the
    increment over [0, t) sums rows 0..Nt-1.  The definitional indexing
    (rows 1..Nt, i.e. Q_N(t) - Q_N(0)) is reported alongside as a diagnostic.
    """
    spec = cfg.spec()
    code, par, shift = _args(spec)
    phi = cfg.phis()[0]
    grid = np.asarray(cfg.opt("t_grid", list(np.geomspace(1.0 / 256.0, 0.25, 7))), dtype=float)
    lo, hi = (float(x) for x in cfg.opt("slope_range", [0.8, 1.2]))
    rows_out = []
    for N in cfg.N:
        R = np.array([_rows(x, N) for x in grid], dtype=np.int64)
        if np.any(R < 1) or np.any(np.diff(R) <= 0):
            raise ValueError("t_grid must map to distinct positive row counts")
        rec_rows = np.unique(np.concatenate(([0], R - 1, R)))
        seeds = env.replica_seeds(stage_seed(cfg.seed, "qmf-inc", N, phi.label()), cfg.replicas)
        pc = np.array([phi.code])
        pp = phi.params[None, :]
        Q, _ = _chunked(lambda s: mc.mc_qmf(s, code, par, shift, spec.sigma2, float(N), rec_rows,
                                            pc, pp, pc, pp), seeds, budget)
        Q = Q[:, :, 0]
        idx = {int(r): i for i, r in enumerate(rec_rows)}
        pred = np.stack([Q[:, idx[int(r) - 1]] for r in R], axis=1)
        defn = np.stack([Q[:, idx[int(r)]] - Q[:, idx[0]] for r in R], axis=1)
        x = np.log(R / N)
        inp = _inputs(law=spec.describe(), N=N, phi=phi.label(), replicas=len(Q))
        for name, inc in (("predictable", pred), ("definitional", defn)):
            sq = inc ** 2
            slope, se = _jackknife_slope(x, sq)
            if name == "predictable":
                rec.within(inp, "qmf_increment_exponent", slope, se, lo, hi)
            else:
                rec.diag(inp, "qmf_increment_exponent_definitional", slope, se=se)
            m = sq.mean(axis=0)
            s = sq.std(axis=0, ddof=1) / math.sqrt(len(sq))
            for tt, mm, ss in zip(R / N, m, s):
                rows_out.append((N, name, float(tt), float(mm), float(ss)))
    return ("N", "convention", "t_minus_s", "mean_sq_increment", "se"), rows_out


def _jackknife_slope(x, samples, blocks=20):
    """OLS slope of log mean(samples) against x, with a block-jackknife SE."""
    def slope(s):
        return float(np.polyfit(x, np.log(s.mean(axis=0)), 1)[0])

    full = slope(samples)
    n = len(samples)
    b = min(blocks, n)
    edges = np.linspace(0, n, b + 1).astype(int)
    loo = []
    for i in range(b):
        keep = np.concatenate((samples[:edges[i]], samples[edges[i + 1]:]))
        loo.append(slope(keep))
    loo = np.array(loo)
    se = math.sqrt((b - 1) / b * float(np.sum((loo - loo.mean()) ** 2)))
    return full, se


def _key_estimate(cfg, rec, budget):
    """Mean square of D = Q_N(t, xi_eps^a) - coef N^{-1} sum_{r <= Nt} U_N(r/N, xi_{eps sqrt2}^a)^2.

    The correct coefficient is 8 sigma^2/(1 - 4 sigma^2); the naive one is
    8 sigma^2.  Stages sharing N are computed from the same replicas.
    """
    spec = cfg.spec()
    code, par, shift = _args(spec)
    a = float(cfg.opt("a", 1.0))
    if a == 0.0:
        raise ValueError("the key estimate needs a != 0")
    t = float(cfg.opt("t_key", 1.0))
    stairs = [(int(n), float(e)) for n, e in cfg.opt("staircase", [[256, 0.5], [1024, 0.5], [1024, 0.25]])]
    n_rep = int(cfg.opt("key_replicas", cfg.replicas))
    s2 = spec.sigma2
    coefs = {"correct": 8.0 * s2 / (1.0 - 4.0 * s2) if s2 < 0.25 else math.inf, "naive": 8.0 * s2}
    mult = cfg.tol("cross_se")
    results = {}
    for N in sorted(set(n for n, _ in stairs)):
        epss = [e for n, e in stairs if n == N]
        psi = [TestFunction.gaussian(a, e) for e in epss]
        chi = [TestFunction.gaussian(a, e * math.sqrt(2.0)) for e in epss]
        T = _rows(t, N)
        seeds = env.replica_seeds(stage_seed(cfg.seed, "key", N, a, t), n_rep)
        Q, S = _chunked(lambda s: mc.mc_qmf(s, code, par, shift, s2, float(N), np.array([T]),
                                            np.array([f.code for f in psi]),
                                            np.array([f.params for f in psi]),
                                            np.array([f.code for f in chi]),
                                            np.array([f.params for f in chi])), seeds, budget)
        for i, e in enumerate(epss):
            q, s = Q[:, 0, i], S[:, 0, i]
            results[(N, e)] = {name: (q - c * s) ** 2 for name, c in coefs.items()}
    rows = []
    for N, e in stairs:
        inp = _inputs(law=spec.describe(), N=N, eps=e, a=a, t=t)
        for name in coefs:
            d2 = results[(N, e)][name]
            m, se = mean_se(d2)
            rec.diag(f"{inp};coef={name};replicas={len(d2)}", "key_mean_square", m, se=se)
            med = float(np.median(d2))
            rec.diag(f"{inp};coef={name}", "key_median_square", med, tolerance=0.0)
            top = float(np.sort(d2)[-10:].sum() / d2.sum()) if d2.sum() > 0 else 0.0
            rec.diag(f"{inp};coef={name}", "key_top10_share", top, tolerance=0.0)
            rows.append((N, e, name, len(d2), m, se, med, top))
    # monotone decrease along the staircase (correct coefficient)
    ms = [mean_se(results[st]["correct"]) for st in stairs]
    steps = [ms[i + 1][0] - ms[i][0] for i in range(len(ms) - 1)]
    worst = int(np.argmax(steps)) if steps else 0
    if steps:
        se = math.hypot(ms[worst][1], ms[worst + 1][1])
        rec.flag(_inputs(law=spec.describe(), staircase=stairs), "key_staircase_max_step",
                 steps[worst], se, all(d < 0 for d in steps), "every step < 0")
    # naive-coefficient plateau above the correct one at the last stage
    last = stairs[-1]
    mc_, sc_ = mean_se(results[last]["correct"])
    mn_, sn_ = mean_se(results[last]["naive"])
    inp = _inputs(law=spec.describe(), N=last[0], eps=last[1], a=a, t=t)
    rec.above(inp, "key_naive_minus_correct", mn_ - mc_, math.hypot(sc_, sn_), mult=mult)
    pd, pse = mean_se(results[last]["naive"] - results[last]["correct"])
    rec.diag(inp, "key_naive_minus_correct_paired", pd, se=pse)
    return ("N", "eps", "coefficient", "replicas", "mean_square", "se", "median_square",
            "top10_share"), rows


# ---------------------------------------------------------------------------
# chaos


def run_chaos_experiment(cfg):
    """Rescaled chaos terms of order <= K.

    Options: ``K`` (default 2), ``x`` (point of the pointwise order-1 check,
    default 0.0), ``point_replicas``.  Uses t = cfg.t[0] and the first test
    function for the paired terms.
    """
    t0 = time.perf_counter()
    rec = _Recorder("chaos")
    budget = _Budget(cfg.budget_seconds)
    spec = cfg.spec()
    code, par, shift = _args(spec)
    K = int(cfg.opt("K", 2))
    x0 = float(cfg.opt("x", 0.0))
    t = cfg.t[0]
    phi = cfg.phis()[0]
    mult = cfg.tol("cross_se")
    dmult = cfg.tol("dist_se")
    s2 = spec.sigma2
    rows = []
    for N in cfg.N:
        T = _rows(t, N)
        inp = _inputs(law=spec.describe(), N=N, t=t, phi=phi.label())
        seeds = env.replica_seeds(stage_seed(cfg.seed, "chaos", N, t, phi.label()), cfg.replicas)
        o = _chunked(lambda s: mc.mc_chaos_terms(s, code, par, shift, float(N), T, K, -1, 1.0,
                                                 phi.code, phi.params), seeds, budget)
        terms, full = o[:, :K + 1], o[:, K + 1]
        if s2 == 0.0:
            rec.exact(inp, "max_abs_higher_terms", float(np.max(np.abs(terms[:, 1:]))), 0.0, 0.0)
        else:
            v1, se1 = mean_se(terms[:, 1] ** 2)
            ex = chaos.first_order_variance_exact(N, t, s2, phi=phi)
            rec.close(inp, "order1_variance_vs_exact", v1, se1, ex, mult=mult)
            if phi.kind == "gaussian":
                # the exact finite-N value carries an O(N^{-1/2}) bias, so this is reported only
                lim = chaos.first_order_variance_paired_limit(s2, t, phi)
                rec.diag(inp, "order1_variance_limit", lim, tolerance=1e-12)
                rec.diag(inp, "order1_variance_minus_limit", v1 - lim, se=se1)
            # orthogonality: order 0 is deterministic, so check E[term_l] = 0 and E[term_k term_l] = 0
            for l in range(1, K + 1):
                m, se = mean_se(terms[:, l])
                rec.close(inp, f"mean_order{l}", m, se, 0.0, mult=dmult)
            for k, l in combinations(range(1, K + 1), 2):
                m, se = mean_se(terms[:, k] * terms[:, l])
                rec.close(inp, f"orthogonality_{k}{l}", m, se, 0.0, mult=dmult)
            defect = full ** 2 - np.sum(terms ** 2, axis=1)
            m, se = mean_se(defect)
            rec.above(inp, f"truncation_defect_K{K}", m, se, mult=mult)
            # pointwise order-1 term against its exact variance
            n_pt = int(cfg.opt("point_replicas", max(1, cfg.replicas // 5)))
            n, y = chaos.lattice_site(N, t, x0)
            pseeds = env.replica_seeds(stage_seed(cfg.seed, "chaos-point", N, t, x0), n_pt)
            op = _chunked(lambda s: mc.mc_chaos_terms(s, code, par, shift, float(N), T, 1, (y + n) // 2,
                                                      math.sqrt(N) / 2.0, phi.code, phi.params),
                          pseeds, budget)
            pv, pse = mean_se(op[:, 1] ** 2)
            pinp = _inputs(law=spec.describe(), N=N, t=t, x=x0)
            rec.close(pinp, "pointwise_order1_variance_vs_exact", pv, pse,
                      chaos.first_order_variance_exact(N, t, s2, x=x0), mult=mult)
            rec.diag(pinp, "pointwise_order1_continuum_value",
                     chaos.first_order_variance_limit(s2, t, x0), tolerance=1e-12)
        for k in range(K + 1):
            m, se = mean_se(terms[:, k] ** 2)
            rows.append((N, t, phi.label(), k, m, se))
        m, se = mean_se(full ** 2)
        rows.append((N, t, phi.label(), "full", m, se))
    return RunResult("chaos", rec.records,
                     {"second_moments": (("N", "t", "phi", "order", "mean_square", "se"), rows)},
                     budget.hit, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# extremes


def run_extreme_experiment(cfg):
    """Recentered quenched maxima of k(N) walkers against the Gumbel reference.

    Options: ``c`` (default 1), ``d`` (default 0), ``samples`` (inverse
    transform draws per environment), ``ks_max`` (default 0.05),
    ``d_shift`` (extra d values checked at sigma = 0), ``d_shift_tol``.
    Uses t = cfg.t[0]; with sigma = 0 one environment is enough.
    """
    t0 = time.perf_counter()
    rec = _Recorder("extremes")
    budget = _Budget(cfg.budget_seconds)
    spec = cfg.spec()
    code, par, shift = _args(spec)
    c = float(cfg.opt("c", 1.0))
    d = float(cfg.opt("d", 0.0))
    t = cfg.t[0]
    ks_max = float(cfg.opt("ks_max", 0.05))
    mult = cfg.tol("cross_se")
    degenerate = spec.sigma2 == 0.0
    samples = int(cfg.opt("samples", cfg.replicas if degenerate else 1))
    n_env = 1 if degenerate else cfg.replicas
    rows, ks_list = [], []
    for N in cfg.N:
        x, ref = _extreme_samples(spec, N, c, d, t, n_env, samples,
                                  stage_seed(cfg.seed, "extremes", N, c, d, t), budget)
        inp = _inputs(law=spec.describe(), N=N, t=t, c=c, d=d, samples=len(x))
        ks = float(stats.kstest(x, ref.cdf).statistic)
        ks_list.append(ks)
        # sd of sqrt(n) times the KS distance under the null is about 0.26
        rec.diag(inp, "ks_distance", ks, se=0.26 / math.sqrt(len(x)))
        var = float(np.var(x))
        m4 = float(np.mean((x - x.mean()) ** 4))
        se_var = math.sqrt(max(m4 - var * var, 0.0) / len(x))
        rec.diag(inp, "recentered_variance", var, se=se_var, target=ref.variance())
        rec.diag(inp, "recentered_mean", float(np.mean(x)), se=float(np.std(x)) / math.sqrt(len(x)),
                 target=ref.shift + ref.scale * np.euler_gamma)
        if not degenerate:
            rec.above(inp, "variance_excess_over_gumbel", var - ref.variance(), se_var, mult=mult)
        rows.append((N, t, c, d, len(x), ks, var, ref.variance(), float(np.mean(x)), ref.a_N))
    if degenerate:
        inp = _inputs(law=spec.describe(), N=cfg.N, t=t, c=c, d=d)
        n_last = samples
        rec.flag(inp, "ks_final", ks_list[-1], 0.26 / math.sqrt(n_last), ks_list[-1] < ks_max,
                 f"value < {ks_max:g}")
        if len(ks_list) > 1:
            steps = np.diff(ks_list)
            rec.flag(inp, "ks_max_step", float(np.max(steps)), 0.26 * math.sqrt(2.0 / n_last),
                     bool(np.all(steps < 0)), "every step < 0")
        # dependence on d at the largest N.  One-sided shifts carry a correction odd in
        # the offset, of order offset * log(N) * N^{-1/4}; the symmetrized shift cancels it.
        dvals = [float(v) for v in cfg.opt("d_shift", [])]
        if dvals:
            N = cfg.N[-1]
            tol = float(cfg.opt("d_shift_tol", 0.05))
            base = _quenched_mean(spec, N, c, d, t)
            for h in dvals:
                up = _quenched_mean(spec, N, c, d + h, t) - base
                down = _quenched_mean(spec, N, c, d - h, t) - base
                ref = [sheref.extreme_shift(c, v, t) - sheref.extreme_shift(c, d, t) for v in (d + h, d - h)]
                hin = _inputs(law=spec.describe(), N=N, t=t, c=c, d=d, offset=h)
                rec.diag(hin, "d_shift_up", up, tolerance=tol, target=ref[0])
                rec.diag(hin, "d_shift_down", down, tolerance=tol, target=ref[1])
                rec.exact(hin, "d_shift_symmetrized", 0.5 * (up + down), 0.5 * (ref[0] + ref[1]), tol)
    header = ("N", "t", "c", "d", "samples", "ks", "variance", "gumbel_variance", "mean", "a_N")
    return RunResult("extremes", rec.records, {"summary": (header, rows)}, budget.hit,
                     time.perf_counter() - t0)


def _extreme_setup(N, c, d, t):
    k = sheref.k_of_N(N, c, d)
    if k < 2:
        raise ValueError(f"k(N) = {k} < 2: the maximum of a single walker is not Gumbel")
    ref = sheref.extreme_reference(c, d, t, N)
    v = math.sqrt(c / t) * float(N) ** -0.25
    if v >= 1.0:
        raise ValueError("velocity sqrt(c/t) N^{-1/4} must be below 1")
    return k, ref, math.atanh(v)


def _extreme_samples(spec, N, c, d, t, n_env, samples, seed, budget):
    k, ref, tilt = _extreme_setup(N, c, d, t)
    T = _rows(t, N)
    code, par, shift = _args(spec)
    seeds = env.replica_seeds(seed, n_env)
    s, _, _ = _chunked(lambda sd: mc.mc_extremes(sd, code, par, shift, T, tilt, math.log(k), samples,
                                                 ref.a_N, float(N) ** -0.25), seeds, budget,
                       chunk=max(1, 200000 // max(samples, 1)))
    return s.ravel(), ref


def _quenched_mean(spec, N, c, d, t):
    k, ref, tilt = _extreme_setup(N, c, d, t)
    code, par, shift = _args(spec)
    _, m, _ = mc.mc_extremes(env.replica_seeds(0, 1), code, par, shift, _rows(t, N), tilt,
                             math.log(k), 1, ref.a_N, float(N) ** -0.25)
    return float(m[0])


# ---------------------------------------------------------------------------
# noise


def run_noise_experiment(cfg):
    """Space-time noise field, white-noise pairing and the cross-variation.

    Options: ``st`` (space-time gaussian {t0, x0, st, sx}), ``xi_replicas``,
    ``var_rel_tol`` (default 0.02).  Uses t = cfg.t[0] and the first test
    function.
    """
    t0 = time.perf_counter()
    rec = _Recorder("noise")
    budget = _Budget(cfg.budget_seconds)
    spec = cfg.spec()
    code, par, shift = _args(spec)
    st = SpaceTimeGaussian(**cfg.opt("st", {}))
    stp = np.asarray(st.params, dtype=float)
    t = cfg.t[0]
    phi = cfg.phis()[0]
    rel_tol = float(cfg.opt("var_rel_tol", 0.02))
    n_xi = int(cfg.opt("xi_replicas", cfg.replicas))
    mult = cfg.tol("cross_se")
    dmult = cfg.tol("dist_se")
    s2 = spec.sigma2
    rows = []
    for N in cfg.N:
        T = _rows(t, N)
        xseeds = env.replica_seeds(stage_seed(cfg.seed, "xi", N), n_xi)
        xi = _chunked(lambda s: mc.mc_xi(s, code, par, shift, s2, float(N), stp), xseeds, budget,
                      chunk=20000)
        inp = _inputs(law=spec.describe(), N=N, st=tuple(float(v) for v in stp), replicas=len(xi))
        if s2 == 0.0:
            rec.exact(inp, "xi_max_abs", float(np.max(np.abs(xi))), 0.0, 0.0)
        else:
            v = float(np.var(xi, ddof=1))
            m4 = float(np.mean((xi - xi.mean()) ** 4))
            se_v = math.sqrt(max(m4 - v * v, 0.0) / len(xi))
            target = st.l2_norm_sq()
            rec.flag(inp, "xi_variance_relative_error", v / target - 1.0, se_v / target,
                     abs(v / target - 1.0) <= rel_tol, f"|value| <= {rel_tol:g}")
            m, se = mean_se(xi)
            rec.close(inp, "xi_mean", m, se, 0.0, mult=dmult)
        seeds = env.replica_seeds(stage_seed(cfg.seed, "noise", N, t, phi.label()), cfg.replicas)
        o = _chunked(lambda s: mc.mc_noise(s, code, par, shift, s2, float(N), T, phi.code, phi.params),
                     seeds, budget, chunk=2000)
        M, Wf, cross, real, opt, pred = (o[:, i] for i in range(6))
        inp = _inputs(law=spec.describe(), N=N, t=t, phi=phi.label(), replicas=len(o))
        if s2 == 0.0:
            rec.exact(inp, "martingale_max_abs", float(np.max(np.abs(M))), 0.0, 0.0)
        else:
            m, se = mean_se(cross - real)
            rec.close(inp, "cross_exact_minus_realized", m, se, 0.0, mult=dmult)
            m, se = mean_se(opt - pred)
            rec.close(inp, "optional_minus_predictable_qv", m, se, 0.0, mult=dmult)
            m, se = mean_se(M)
            rec.close(inp, "martingale_mean", m, se, 0.0, mult=dmult)
            r = float(np.corrcoef(M, Wf)[0, 1])
            r_se = (1.0 - r * r) / math.sqrt(len(M))
            if s2 < 0.25:
                lim, cs = sheref.noise_correlation_limit(s2, t, phi)
                rec.diag(inp, "corr_M_W", r, se=r_se, target=lim)
                rec.close(inp, "memory_fraction", r / math.sqrt(cs), r_se / math.sqrt(cs),
                          math.sqrt(1.0 - 4.0 * s2), mult=mult)
            rows.append((N, t, phi.label(), len(o), float(np.mean(cross)), float(np.mean(real)),
                         float(np.mean(opt)), float(np.mean(pred)), r))
    header = ("N", "t", "phi", "replicas", "cross_exact_mean", "realized_mean", "optional_qv_mean",
              "predictable_qv_mean", "corr_M_W")
    return RunResult("noise", rec.records, {"summary": (header, rows)}, budget.hit,
                     time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# identity suite


def run_identity_suite(cfg):
    """Exact identities on the DP, the chaos expansion and the enumeration oracle.

    Options: ``seeds`` (default [1, 2, 3]), ``chaos_envs`` (default 100),
    ``chaos_n`` (default 8), ``oracle_N`` (default 16), ``oracle_steps``
    (default 4), ``t_identity`` (default 1.0), ``mass_T`` (default 5000, the
    horizon of the long mass-conservation check).
    """
    t0 = time.perf_counter()
    rec = _Recorder("identities")
    spec = cfg.spec()
    seeds = [int(s) for s in cfg.opt("seeds", [1, 2, 3])]
    tt = float(cfg.opt("t_identity", 1.0))
    phis = cfg.phis()
    for N in cfg.N:
        T = min(_rows(tt, N), 5000)
        for s in seeds:
            _dp_identities(rec, cfg, spec, N, T, s, phis)
    mass_T = int(cfg.opt("mass_T", 5000))
    for s in seeds:
        worst, neg = qkernel.mass_defect(env.Environment(s, spec), mass_T)
        inp = _inputs(law=spec.describe(), T=mass_T, seed=s)
        rec.exact(inp, "mass_defect_long", worst, 0.0, cfg.tol("mass"))
        rec.exact(inp, "negative_entries_long", float(neg), 0.0, 0.0)
    _chaos_identities(rec, cfg, spec)
    if spec.finite_support and spec.sigma2 < 0.25:
        _oracle_identities(rec, cfg, spec)
    return RunResult("identities", rec.records, {}, False, time.perf_counter() - t0)


def _dp_identities(rec, cfg, spec, N, T, seed, phis):
    e = env.Environment(seed, spec)
    inp = _inputs(law=spec.describe(), N=N, T=T, seed=seed)
    worst, neg = qkernel.mass_defect(e, T)
    rec.exact(inp, "mass_defect", worst, 0.0, cfg.tol("mass"))
    raw = qkernel.evolve_density(e, T)
    if spec.kind == "bernoulli-half":
        rec.exact(inp, "mass_concentration", min(float(np.max(d.P)) for d in raw), 1.0, cfg.tol("mass"))
    run = dshe.DiscreteSheRun(e, N, T)
    rel = max(float(np.max(np.abs(run.W(r) - np.exp(qkernel.log_tilt(N, r, raw[r].y)) * raw[r].P))
                    / np.max(np.abs(run.W(r)))) for r in range(T + 1))
    rec.exact(inp, "tilted_vs_raw", rel, 0.0, cfg.tol("tilt"))
    sten = max(float(np.max(np.abs(h - st))) for _, h, st in (run.v_field(r) for r in range(T)))
    rec.exact(inp, "heat_vs_stencil", sten, 0.0, cfg.tol("stencil"))
    t = T / N
    for phi in phis:
        pin = f"{inp};phi={phi.label()}"
        a, b = run.m_field(t, phi)
        rec.exact(pin, "m_sum_vs_grad", abs(a - b), 0.0, cfg.tol("exact"))
        lhs, rhs = run.mq_decomposition(t, phi)
        if spec.sigma2 == 0.0:
            rec.exact(pin, "martingale_zero", abs(b), 0.0, 0.0)
            opt, pred = run.quadratic_variations(t, phi)
            rec.exact(pin, "qv_zero", abs(opt) + abs(pred), 0.0, 0.0)
        else:
            rec.exact(pin, "mq_decomposition_rel", abs(lhs - rhs) / abs(lhs), 0.0, cfg.tol("exact"))
        if phi.kind != "gaussian" and math.isfinite(phi.c1_norm()):
            absd, bound, literal = run.error_bound_rows(phi)
            ratio = float(np.max(np.where(bound > 0, absd / np.where(bound > 0, bound, 1.0), 0.0)))
            rec.bound(pin, "error_bound_ratio", ratio, 1.0)
            lit = float(np.max(np.where(literal > 0, absd / np.where(literal > 0, literal, 1.0), 0.0)))
            rec.diag(pin, "error_bound_literal_ratio", lit, tolerance=0.0, target=1.0)
    if spec.sigma2 == 0.0:
        xi = run.noise_field(SpaceTimeGaussian(t0=0.5 * t, x0=0.0, st=0.25 * t, sx=0.5))
        rec.exact(inp, "xi_zero", abs(xi), 0.0, 0.0)


def _chaos_identities(rec, cfg, spec):
    n_env = int(cfg.opt("chaos_envs", 100))
    n_max = int(cfg.opt("chaos_n", 8))
    worst = 0.0
    for i in range(n_env):
        e = env.Environment(stage_seed(cfg.seed, "chaos-identity", i), spec)
        dens = qkernel.evolve_density(e, n_max)
        for n in range(n_max + 1):
            for y, p in zip(dens[n].y, dens[n].P):
                worst = max(worst, abs(chaos.reconstruct(e, n, int(y)) - p))
    rec.exact(_inputs(law=spec.describe(), envs=n_env, n_max=n_max), "chaos_reconstruction",
              worst, 0.0, cfg.tol("exact"))


def _oracle_identities(rec, cfg, spec):
    N = int(cfg.opt("oracle_N", 16))
    steps = int(cfg.opt("oracle_steps", 4))
    tol = cfg.tol("exact")
    lam = float(N) ** -0.25
    sk = env.skewed_spec(spec, N)
    inp = _inputs(law=spec.describe(), N=N, steps=steps)
    starts = [(0, 0), (0, 2), (-2, 2)]
    # E[m^lambda(r)] = 1
    worst = 0.0
    for st in starts:
        for r in range(1, steps + 1):
            task = oracle.EnumerationTask(spec, st, r,
                                          lambda p: math.exp(kpoint.exp_martingale(p, lam, spec)[-1]))
            worst = max(worst, abs(oracle.exact_expectation(task) - 1.0))
    rec.exact(inp, "exp_martingale_mean_minus_one", worst, 0.0, tol)
    # Tanaka: one-step conditional mean of the martingale increment is 0
    coef = 4.0 * (spec.mu * (1.0 - spec.mu) - spec.sigma2)
    worst = 0.0
    for pos in [(0, 0), (0, 2), (1, -1), (0, 0, 2), (2, 2, 2)]:
        for i, j in combinations(range(len(pos)), 2):
            def inc(old, new, i=i, j=j):
                return coef * float(old[i] == old[j]) - (abs(new[i] - new[j]) - abs(old[i] - old[j]))
            worst = max(worst, abs(oracle.exact_conditional_mean(spec, pos, inc)))
    rec.exact(inp, "tanaka_conditional_mean", worst, 0.0, tol)
    # change of measure: E_nu[m F] = E_skew[exp(G_tilde) F], and dG_tilde = 0 off collisions
    worst = 0.0
    worst_distinct = 0.0
    fns = [lambda p: 1.0, lambda p: float(p[-1][0] == p[-1][1]), lambda p: float(p[-1][0] - p[-1][1]) ** 2]
    for st in [(0, 0), (0, 2)]:
        for r in range(1, steps + 1):
            P0, pr0 = oracle.path_law(spec, st, r)
            P1, pr1 = oracle.path_law(sk, st, r)
            led1 = [kpoint.girsanov_ledger(p, N, spec, sk) for p in P1]
            for F in fns:
                lhs = sum(q * math.exp(kpoint.exp_martingale(p, lam, spec)[-1]) * F(p)
                          for p, q in zip(P0, pr0))
                rhs = sum(q * math.exp(L.G_tilde[-1]) * F(p) for p, q, L in zip(P1, pr1, led1))
                worst = max(worst, abs(lhs - rhs))
            for p, L in zip(P1, led1):
                dg = np.diff(L.G_tilde)
                free = L.colliding_pairs == 0
                if np.any(free):
                    worst_distinct = max(worst_distinct, float(np.max(np.abs(dg[free]))))
    rec.exact(inp + ";k=2", "radon_nikodym_identity", worst, 0.0, tol)
    rec.exact(inp + ";k=2", "g_increment_off_collisions", worst_distinct, 0.0, 1e-14)
    # U_N moments: enumeration over environments vs annealed path expectation
    phi = TestFunction.gaussian(0.0, 1.0)
    worst = 0.0
    for r in (1, 2, 3):
        for k in (1, 2):
            a = oracle.field_moment_by_environments(spec, N, r, phi, k)
            b = oracle.field_moment_by_paths(spec, N, r, phi, k)
            worst = max(worst, abs(a - b))
    rec.exact(inp, "field_moment_two_routes", worst, 0.0, tol)


RUNNERS = {
    "density": run_density,
    "moments": run_moment_experiment,
    "qmf": run_qmf_experiment,
    "chaos": run_chaos_experiment,
    "extremes": run_extreme_experiment,
    "noise": run_noise_experiment,
    "identities": run_identity_suite,
}


def run(cfg):
    return RUNNERS[cfg.experiment](cfg)
