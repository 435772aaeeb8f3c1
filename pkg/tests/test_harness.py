"""Configuration, records, persistence and runner guards."""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from rwre import harness

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def _cfg(**kw):
    base = dict(experiment="density", law="uniform", N=[64], t=[1.0], replicas=10, seed=1)
    base.update(kw)
    return harness.ExperimentConfig.from_dict(base)


@pytest.mark.parametrize("bad", [
    {"experiment": "nope"},
    {"N": []},
    {"N": [0]},
    {"t": [0.0]},
    {"t": [-1.0]},
    {"replicas": 0},
    {"threads": 0},
    {"tolerances": {"bogus": 1.0}},
    {"law": "cauchy"},
    {"law": "two-point", "law_params": {"a": 0.7}},
    {"test_functions": [{"kind": "sinc"}]},
    {"schema": 2},
    {"colour": "red"},
])
def test_config_validation(bad):
    with pytest.raises((ValueError, TypeError)):
        _cfg(**bad)


def test_config_needs_experiment():
    with pytest.raises(ValueError):
        harness.ExperimentConfig.from_dict({"law": "uniform"})
    with pytest.raises(ValueError):
        harness.ExperimentConfig.from_dict(["density"])


def test_config_coerces_scalars():
    cfg = _cfg(N=256, t=0.5)
    assert cfg.N == [256] and cfg.t == [0.5]


def test_digest_ignores_threads_and_out():
    a = _cfg(threads=1, out="x")
    b = _cfg(threads=8, out="y")
    assert a.digest() == b.digest()
    assert a.digest() != _cfg(seed=2).digest()
    assert a.digest() != _cfg(options={"seeds": [1]}).digest()


def test_tolerance_profile():
    cfg = _cfg(tolerances={"mass": 1e-9})
    assert cfg.tol("mass") == 1e-9
    assert cfg.tol("exact") == harness.DEFAULT_TOLERANCES["exact"]


def test_load_config_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        harness.load_config(tmp_path / "missing.cfg")
    bad = tmp_path / "bad.cfg"
    bad.write_text("experiment: [density\n")
    with pytest.raises(ValueError):
        harness.load_config(bad)
    lst = tmp_path / "list.cfg"
    lst.write_text("- density\n")
    with pytest.raises(ValueError):
        harness.load_config(lst)


def test_load_config_overrides():
    cfg = harness.load_config(CONFIGS / "small.cfg", seed=99, threads=None, out="elsewhere")
    assert cfg.seed == 99 and cfg.out == "elsewhere" and cfg.threads == 1


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.cfg")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    cfg = harness.load_config(path)
    assert cfg.experiment in harness.EXPERIMENTS


def test_record_invariants():
    with pytest.raises(ValueError):
        harness.ResultRecord("x", "exact", "", "s", 1.0)
    with pytest.raises(ValueError):
        harness.ResultRecord("x", "statistical", "", "s", 1.0)
    with pytest.raises(ValueError):
        harness.ResultRecord("x", "fuzzy", "", "s", 1.0, se=1.0, tolerance=1.0)
    r = harness.ResultRecord("x", "statistical", "N=1", "s", 0.1, se=0.01, passed=True)
    assert r.row()[4] == repr(0.1) and r.row()[9] == "PASS"


@pytest.mark.parametrize("method, args, passed", [
    ("exact", ("i", "s", 1.0 + 1e-12, 1.0, 1e-10), True),
    ("exact", ("i", "s", 1.1, 1.0, 1e-10), False),
    ("close", ("i", "s", 1.05, 0.02, 1.0), True),
    ("close", ("i", "s", 1.07, 0.02, 1.0), False),
    ("apart", ("i", "s", 1.07, 0.02, 1.0), True),
    ("above", ("i", "s", 0.07, 0.02), True),
    ("above", ("i", "s", 0.05, 0.02), False),
    ("within", ("i", "s", 1.1, 0.05, 0.8, 1.2), True),
    ("bound", ("i", "s", 0.9, 1.0), True),
])
def test_recorder_gates(method, args, passed):
    rec = harness._Recorder("moments")
    r = getattr(rec, method)(*args)
    assert r.passed is passed
    assert r.version == harness.version_stamp()
    assert (r.se is not None) or (r.tolerance is not None)


def test_diagnostics_are_ungated():
    rec = harness._Recorder("moments")
    assert rec.diag("i", "s", 1.0, se=0.1).passed is None
    assert rec.diag("i", "s", 1.0).tolerance == 0.0
    res = harness.RunResult("moments", rec.records)
    assert res.ok and not res.failures()


def test_stage_seed():
    assert harness.stage_seed(1, "a", 2) == harness.stage_seed(1, "a", 2)
    seeds = {harness.stage_seed(1, "a", i) for i in range(100)}
    assert len(seeds) == 100
    assert harness.stage_seed(1, "a") != harness.stage_seed(2, "a")
    assert 0 <= harness.stage_seed(5, "x") < 2 ** 64


def test_chunked_budget_flags_partial():
    seeds = np.arange(20, dtype=np.uint64)
    budget = harness._Budget(0.0)
    time.sleep(0.01)
    out = harness._chunked(lambda s: s.astype(float), seeds, budget, chunk=5)
    assert len(out) == 5 and budget.hit
    full = harness._chunked(lambda s: (s, 2 * s), seeds, harness._Budget(None), chunk=5)
    assert np.array_equal(full[1], 2 * seeds)


def test_mean_se():
    m, se = harness.mean_se([1.0, 2.0, 3.0])
    assert m == 2.0 and se == pytest.approx(1.0 / math.sqrt(3))
    assert harness.mean_se([1.0])[1] == math.inf


def test_csv_roundtrip_and_metadata(tmp_path):
    cfg = _cfg(out=str(tmp_path))
    res = harness.run(cfg)
    paths = harness.save_result(res, cfg)
    rows = harness.read_records(tmp_path / "density.csv")
    assert tuple(rows[0]) == harness.RECORD_COLUMNS
    assert [r["statistic"] for r in rows] == [r.statistic for r in res.records]
    assert [float(r["value"]) for r in rows] == [r.value for r in res.records]
    meta = json.loads((tmp_path / "density.json").read_text())
    for key in ("seed", "config_sha256", "versions", "wall_time_seconds", "partial", "version"):
        assert key in meta
    assert meta["config_sha256"] == cfg.digest()
    assert meta["n_fail"] == 0
    assert any(p.name.startswith("density_") for p in paths)


def test_budget_exhaustion_is_flagged(tmp_path):
    cfg = _cfg(experiment="moments", N=[64], replicas=20000, budget_seconds=0.0,
               options={"k": [1]}, out=str(tmp_path))
    res = harness.run(cfg)
    assert res.partial
    harness.save_result(res, cfg)
    assert json.loads((tmp_path / "moments.json").read_text())["partial"] is True


def test_moment_order_guard():
    with pytest.raises(ValueError):
        harness.run(_cfg(experiment="moments", options={"k": [5]}))


@pytest.mark.parametrize("N, c", [(1, 1.0), (4, 0.5)])
def test_extreme_guard_single_walker(N, c):
    # k(N) = 1: the maximum is one walker, whose law is not Gumbel
    with pytest.raises(ValueError):
        harness.run(_cfg(experiment="extremes", law="degenerate-half", N=[N], options={"c": c}))


def test_extreme_guard_velocity():
    with pytest.raises(ValueError):
        harness._extreme_setup(16, 4.0, 0.0, 0.5)


@pytest.mark.parametrize("name", ["identities_degenerate", "identities_bernoulli"])
def test_identity_suites_green(name):
    res = harness.run(harness.load_config(CONFIGS / f"{name}.cfg"))
    assert res.ok, [(r.statistic, r.inputs, r.value) for r in res.failures()]
    names = {r.statistic for r in res.records}
    assert {"mass_defect", "mass_defect_long", "chaos_reconstruction"} <= names


def test_degenerate_suite_trivialises():
    res = harness.run(harness.load_config(CONFIGS / "identities_degenerate.cfg"))
    zero = [r for r in res.records if r.statistic in ("martingale_zero", "qv_zero")]
    assert zero and all(r.value == 0.0 for r in zero)
