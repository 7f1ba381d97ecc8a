import json
import math

import numpy as np
import pytest

from mdlearn import harness as hs
from mdlearn import md_engine as md


def _row(eid="e", n=1, trial=0, observed=0.5, bound=1.0, **kw):
    return hs.ResultRow(eid, n, trial, 7, "regret", observed, bound, **kw)


# ---------------------------------------------------------------- config

def test_config_validation():
    with pytest.raises(ValueError):
        hs.ExperimentConfig(n_grid=[64, 64])
    with pytest.raises(ValueError):
        hs.ExperimentConfig(n_grid=[256, 64])
    with pytest.raises(ValueError):
        hs.ExperimentConfig(trials=3, seeds=[1, 2])
    with pytest.raises(KeyError):
        hs.ExperimentConfig.from_dict({"nope": 1})
    cfg = hs.ExperimentConfig.from_dict({"trials": 2, "n_grid": [8, 16, 32]})
    assert hs.ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_seeds_are_counter_based():
    a = [hs.derive_seed(0, i) for i in range(5)]
    assert a == [hs.derive_seed(0, i) for i in range(5)]
    assert len(set(a)) == 5 and hs.derive_seed(1, 0) != a[0]
    assert all(0 <= s < 2 ** 64 for s in a)
    cfg = hs.ExperimentConfig(trials=2, seeds=[11, 12, 13])
    assert hs.trial_seeds(cfg) == [11, 12]


# ---------------------------------------------------------------- regret games

def test_regret_euclidean_linear_tree():
    cfg = hs.ExperimentConfig(n_grid=[100], trials=5)
    rows = hs.run_regret_experiment(cfg)
    assert len(rows) == 5
    for r in rows:
        assert r.bound == pytest.approx(math.sqrt(2 / 100))
        assert r.observed <= r.bound
        assert r.bound_info["lemma"] == "md-lipschitz"


def test_regret_zero_stream():
    rows = hs.run_regret_experiment(hs.ExperimentConfig(adversary="zero", n_grid=[16], trials=2))
    for r in rows:
        assert r.observed == 0.0 and r.margin == r.bound


def test_regret_entropic_unit_inf():
    cfg = hs.ExperimentConfig(geometry="entropic", d=8, adversary="unit_inf", n_grid=[64], trials=5)
    for r in hs.run_regret_experiment(cfg):
        assert r.bound == pytest.approx(2 * math.sqrt(math.log(8) / 64))
        assert r.observed <= r.bound


def test_incompatible_combinations_rejected():
    for kw in ({"policy": "smooth", "adversary": "linear_tree"},
               {"adversary": "unit_inf"},
               {"policy": "ucvx", "adversary": "regularized_linear"},
               {"policy": "bogus"}):
        with pytest.raises(ValueError):
            hs.run_regret_experiment(hs.ExperimentConfig(n_grid=[8], trials=1, **kw))


def test_regret_is_reproducible_and_thread_independent():
    base = dict(n_grid=[16, 32], trials=4, seed=3)
    a = hs.rows_to_csv(hs.run_regret_experiment(hs.ExperimentConfig(**base)))
    b = hs.rows_to_csv(hs.run_regret_experiment(hs.ExperimentConfig(threads=3, **base)))
    assert a == b


def test_trials_exchangeable():
    seeds = [5, 9, 2]
    a = hs.run_regret_experiment(hs.ExperimentConfig(n_grid=[32], trials=3, seeds=seeds))
    b = hs.run_regret_experiment(hs.ExperimentConfig(n_grid=[32], trials=3, seeds=seeds[::-1]))
    assert {r.seed: r.observed for r in a} == {r.seed: r.observed for r in b}


# ---------------------------------------------------------------- rate fitting

def _synthetic(fn, ns=(64, 256, 1024, 4096)):
    return [_row(n=n, trial=t, observed=fn(n)) for n in ns for t in range(3)]


def test_fit_rate_synthetic():
    assert hs.fit_rate(_synthetic(lambda n: 3 * n ** -0.5))["exponent"] == pytest.approx(-0.5, abs=1e-12)
    assert hs.fit_rate(_synthetic(lambda n: n ** (-1 / 3)))["exponent"] == pytest.approx(-1 / 3, abs=1e-12)
    with pytest.raises(ValueError):
        hs.fit_rate(_synthetic(lambda n: n ** -0.5, ns=(4, 8)))


# ---------------------------------------------------------------- experiments

def test_counterexample_small():
    summary, rows = hs.counterexample_experiment(n=4, trials=20, seed=1, draws=5000)
    assert summary["d"] == 16
    assert {r.metric_name for r in rows} >= {"unobserved_coordinate", "sgd_suboptimality"}
    assert summary["sgd_bound"] == pytest.approx(math.sqrt(2 * 1.01 / 4))
    assert summary["erm_count"] == sum(r.observed for r in rows if r.metric_name == "unobserved_coordinate")


def test_oracle_curve():
    rows = hs.oracle_complexity_curve("md", [1, 4, 16])
    res = [r for r in rows if "resisting" in r.experiment_id]
    ben = [r for r in rows if "benign" in r.experiment_id]
    assert res[0].observed == pytest.approx(1.0)  # m = 1, one piece, h1 = 0
    for r in res:
        assert r.observed >= r.bound - 1e-9 and r.bound_info["kind"] == "lower"
    for r in ben:
        assert r.observed <= r.bound


def test_stability_constant_rule_zero():
    pts = hs.discrete_abs_problem(10, 3)
    est = hs.estimate_ro_stability(lambda S: np.zeros(3),
                                   lambda rng, k: [pts[j] for j in rng.integers(0, 10, size=k)], 5, 30)
    assert est.value == 0.0 and not est.low_trials


def test_stability_rerm_within_rate():
    pts = hs.discrete_abs_problem(20, 5)
    g = md.geo.euclidean(5, 1.0)
    lam, n = 0.5, 16
    est = hs.estimate_ro_stability(lambda S: md.rerm_solve(S, g, lam).h,
                                   lambda rng, k: [pts[j] for j in rng.integers(0, 20, size=k)], n, 30)
    L = 1.0 + lam
    assert est.value <= 4 * L * L / (lam * n) + 3 * est.stderr


def test_stability_low_trials_warns():
    with pytest.warns(RuntimeWarning):
        est = hs.estimate_ro_stability(lambda S: np.zeros(1), lambda rng, k: [md.ls.Linear([1.0])] * k, 2, 5)
    assert est.low_trials


def test_block_sign_summary():
    summary, rows = hs.block_sign_experiment(n=16, trials=20, seed=0)
    assert len(rows) == 20 and summary["d"] == 4
    lo, hi = summary["ci95"]
    assert lo <= summary["mean_regret"] <= hi


# ---------------------------------------------------------------- serialization

def test_csv_header_only(tmp_path):
    p = tmp_path / "empty.csv"
    hs.emit([], str(p))
    assert p.read_text() == ",".join(hs.CSV_COLUMNS) + "\n"
    assert hs.read_csv(str(p)) == []


def test_csv_round_trip(tmp_path):
    rows = [_row("b", 2, 1, observed=1 / 3), _row("a", 5, 0, observed=-0.1, bound=math.pi),
            _row("a", 1, 2, observed=2.0 ** -40)]
    p = tmp_path / "rows.csv"
    hs.emit(rows, str(p))
    back = hs.read_csv(str(p))
    assert [(r.experiment_id, r.n, r.trial) for r in back] == [("a", 1, 2), ("a", 5, 0), ("b", 2, 1)]
    for r in back:
        orig = next(o for o in rows if (o.experiment_id, o.n, o.trial) == (r.experiment_id, r.n, r.trial))
        assert r.observed == orig.observed and r.bound == orig.bound and r.margin == orig.margin
    assert "0.33333333333333331" in p.read_text()


def test_json_output(tmp_path):
    p = tmp_path / "rows.json"
    hs.emit([_row(bound_info={"lemma": "x"})], str(p), "json", config={"seed": 1})
    doc = json.loads(p.read_text())
    assert doc["config"] == {"seed": 1} and doc["rows"][0]["bound_info"] == {"lemma": "x"}
    assert "version" in doc
    with pytest.raises(ValueError):
        hs.emit([], str(p), "xml")


def test_summarize_ignores_lower_bound_rows():
    rows = [_row(observed=2.0, bound=1.0, bound_info={"kind": "lower"}), _row(observed=0.5, bound=1.0)]
    s = hs.summarize(rows)["e"]
    assert s == {"rows": 2, "violations": 0, "min_margin": 0.5}
    s = hs.summarize([_row(observed=1.1, bound=1.0)], tolerance=0.05)["e"]
    assert s["violations"] == 1
