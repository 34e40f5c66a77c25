import json

import numpy as np
import pytest

from clusterlab import cli

QUICK = ["--set", "js=[1,2,3]"]


def _args(argv):
    return cli.build_parser().parse_args(argv)


def test_defaults_cover_every_experiment():
    assert set(cli.RUNNERS) == set(cli.DEFAULTS)
    for name in cli.EXPERIMENTS:
        cfg = cli.build_config(name, {}, _args([name]))
        assert cfg.seed == 0 and cfg.tolerances == cli.DEFAULTS[name]["tolerances"]


def test_precedence_flags_over_file_over_defaults():
    file_cfg = {"seed": 5, "out": "fromfile", "restriction": {"params": {"box": 48.0, "h": 0.5}}}
    cfg = cli.build_config("restriction", file_cfg, _args(["restriction", "--set", "h=0.2", "--seed", "9"]))
    assert cfg.params["box"] == 48.0  # file over default
    assert cfg.params["h"] == 0.2  # flag over file
    assert cfg.params["js"] == cli.DEFAULTS["restriction"]["params"]["js"]
    assert cfg.seed == 9 and cfg.out == "fromfile"


def test_dotted_tolerance_and_convenience_flags():
    a = _args(["cluster-norms", "--tol", "min_slope.8=0.3", "--q", "inf", "--lambda", "40:160:3"])
    cfg = cli.build_config("cluster-norms", {}, a)
    assert cfg.tolerances["min_slope"] == {"8": 0.3, "inf": 0.45}
    assert cfg.params["qs"] == ["inf"]
    np.testing.assert_allclose(cfg.params["lambdas"], [40, 80, 160])
    cfg = cli.build_config("flow-tests", {}, _args(["flow-tests", "--profile", "flat", "--mu", "16"]))
    assert cfg.params["profile"] == "flat" and cfg.params["mu"] == 16


def test_range_parser():
    np.testing.assert_allclose(cli._range("10:1000"), np.geomspace(10, 1000, 6), rtol=5e-6)
    assert cli._range("2:8:3") == pytest.approx([2, 4, 8])
    assert cli._range("5") == [5.0]
    with pytest.raises(ValueError):
        cli._range("8:2")


def test_parse_value():
    assert cli._parse_value("[1, 2]") == [1, 2]
    assert cli._parse_value("0.5") == 0.5
    assert cli._parse_value("disk") == "disk"


def test_csv_formatting():
    text = cli.csv_text(["a", "b", "c", "d"], [[1, 0.1, True, "x,y"]])
    assert text == 'a,b,c,d\n1,0.1,true,"x,y"\n'
    assert cli._cell(np.float64(1 / 3)) == repr(1 / 3)


def test_config_file_loading(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"seed": 3}))
    assert cli.load_config_file(str(p)) == {"seed": 3}
    assert cli.load_config_file(None) == {}


def test_identical_runs_give_identical_csv(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert cli.main(["restriction", "--out", str(d)] + QUICK) == 0
        outs.append((d / "restriction.csv").read_bytes())
    assert outs[0] == outs[1]
    man = json.loads((tmp_path / "run0" / "restriction.manifest.json").read_text())
    assert man["exit_code"] == 0 and man["passed"] and man["seed"] == 0
    assert man["config"]["params"]["js"] == [1, 2, 3]
    assert man["tolerances"] == {"slope": 0.05}
    assert {c["name"] for c in man["checks"]} == {"slope_q6", "slope_q8"}


def test_tolerance_failure_exit_code(tmp_path, capsys):
    code = cli.main(["restriction", "--out", str(tmp_path), "--tol", "slope=0"] + QUICK)
    assert code == 1
    assert "[FAIL] restriction" in capsys.readouterr().out
    man = json.loads((tmp_path / "restriction.manifest.json").read_text())
    assert man["exit_code"] == 1 and not man["passed"]


def test_error_exit_code(tmp_path):
    code = cli.main(["restriction", "--out", str(tmp_path), "--set", "js=[0]"])
    assert code == 2
    man = json.loads((tmp_path / "restriction.manifest.json").read_text())
    assert "j >= 1" in man["error"] and man["traceback"]


def test_bad_config_file_exit_code(tmp_path):
    assert cli.main(["restriction", "--config", str(tmp_path / "missing.json")]) == 2


def test_worker_env(monkeypatch):
    monkeypatch.setenv(cli.WORKERS_ENV, "3")
    assert cli.worker_count() == 3
    monkeypatch.setenv(cli.WORKERS_ENV, "x")
    assert cli.worker_count() == 1
