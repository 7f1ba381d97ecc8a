import json
import subprocess
import sys

import pytest

from mdlearn import cli


def _run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_seed_from_flag(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"trials": 2, "n_grid": [8, 16, 32]}))
    _, cfg = cli.parse(["regret", "--config", str(p), "--seed", "7"])
    assert cfg.seed == 7 and cfg.trials == 2 and cfg.kind == "regret"


def test_overrides_win_over_file(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"trials": 2, "alpha": 0.5}))
    _, cfg = cli.parse(["complexity", "--config", str(p), "--set", "alpha=2", "--trials", "3"])
    assert cfg.alpha == 2 and cfg.trials == 3


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["regret", "--seed", "abc"],
    ["regret", "--seed", str(2 ** 64)],
    ["regret", "--set", "no_such_key=1"],
    ["regret", "--set", "novalue"],
    ["regret", "--trials", "0"],
    ["regret", "--set", "n_grid=[64,32]"],
])
def test_usage_errors_exit_2(argv, capsys):
    code, _, err = _run(argv, capsys)
    assert code == 2 and "usage" in err


def test_help_on_every_subcommand():
    for sub in cli.SUBCOMMANDS:
        r = subprocess.run([sys.executable, "-m", "mdlearn", sub, "--help"], capture_output=True, text=True)
        assert r.returncode == 0 and "--config" in r.stdout


def test_regret_writes_csv(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code, stdout, _ = _run(["regret", "--set", "n_grid=[16,32,64]", "--trials", "2", "--out", str(out)], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("experiment_id,n,trial,seed") and len(lines) == 7
    summary = json.loads(stdout)["summary"]
    assert summary["bounds"]["regret/euclidean/lipschitz/linear_tree"]["violations"] == 0


def test_regret_output_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert _run(["regret", "--set", "n_grid=[16]", "--trials", "3", "--seed", "9", "--out", str(p)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_complexity_over_caps_exit_3(capsys):
    code, _, err = _run(["complexity", "--set", "n_points=8"], capsys)
    assert code == 3 and "cap" in err


def test_complexity_non_binary_class(capsys):
    code, out, _ = _run(["complexity", "--set", "class_kind=\"values\"", "--set", "values=[[0.5,-0.25],[0,1]]",
                         "--set", "alpha=0.5"], capsys)
    assert code == 0
    s = json.loads(out)["summary"]
    assert "littlestone" not in s and s["seq_fat"] >= s["stat_fat"]


def test_experiment_error_exit_1(capsys):
    code, _, err = _run(["regret", "--set", "policy=\"smooth\"", "--set", "n_grid=[8]"], capsys)
    assert code == 1 and "incompatible" in err


def test_counterexample_summary(tmp_path, capsys):
    out = tmp_path / "c.json"
    code, stdout, _ = _run(["counterexample", "--set", "sample_n=4", "--trials", "10",
                            "--set", "draws=2000", "--out", str(out)], capsys)
    assert code == 0
    s = json.loads(stdout)["summary"]
    assert s["d"] == 16
    for k in ("unobserved_frequency", "erm_population_risk_mean", "sgd_suboptimality_mean"):
        assert k in s
    doc = json.loads(out.read_text())
    assert doc["config"]["sample_n"] == 4 and doc["rows"]


def test_other_subcommands_run(capsys):
    assert _run(["oracle-lb", "--set", "m_grid=[2,4]"], capsys)[0] == 0
    assert _run(["experts", "--set", "class_kind=\"constants\"", "--set", "n_points=2",
                 "--set", "n_grid=[16]", "--trials", "1"], capsys)[0] == 0
    code, out, _ = _run(["stability", "--set", "rule=\"constant\"", "--trials", "30"], capsys)
    assert code == 0 and json.loads(out)["summary"]["estimate"] == 0.0


def test_threads_env_override(monkeypatch):
    monkeypatch.setenv("THREADS", "3")
    assert cli.parse(["regret"])[1].threads == 3
    assert cli.parse(["regret", "--threads", "2"])[1].threads == 2
