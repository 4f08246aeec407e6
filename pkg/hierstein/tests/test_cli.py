import json

import pytest
from click.testing import CliRunner

from hierstein.features import bounds, experiment
from hierstein.main import cli


@pytest.fixture
def config_file(tmp_path, clt_config_dict):
    clt_config_dict["n_max"] = 4
    path = tmp_path / "clt.json"
    path.write_text(json.dumps(clt_config_dict))
    return path


@pytest.fixture
def runner():
    return CliRunner()


def test_validate(runner, config_file):
    res = runner.invoke(cli, ["validate", "--config", str(config_file)])
    assert res.exit_code == 0, res.output
    assert "exact atoms at n=4: x=17 y=17" in res.output
    assert "config ok" in res.output


def test_exact_writes_artifacts(runner, config_file, tmp_path):
    out = tmp_path / "out"
    res = runner.invoke(cli, ["exact", "--config", str(config_file), "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert (out / "decay.csv").exists()
    report = (out / "report.txt").read_text()
    assert "verdict=" in report
    assert "verdict:" in res.output


def test_bounds_prints_every_key(runner, config_file, tmp_path):
    res = runner.invoke(cli, ["bounds", "--config", str(config_file), "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    for key in bounds.REPORT_KEYS:
        assert key in res.output
    assert "FAIL" not in res.output
    assert (tmp_path / "report.txt").exists()


def test_zerobias_dumps_a_record(runner, config_file):
    res = runner.invoke(cli, ["zerobias", "--config", str(config_file), "--level", "0", "--effect", "x"])
    assert res.exit_code == 0, res.output
    assert "piecewise n=" in res.output


def test_bad_config_exits_with_code_2(runner, tmp_path, clt_config_dict):
    clt_config_dict["unexpected"] = True
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(clt_config_dict))
    res = runner.invoke(cli, ["validate", "--config", str(path)])
    assert res.exit_code == 2
    assert "error:" in res.output


def test_dependent_bounds_are_refused(runner, tmp_path, clt_config_dict):
    for m in clt_config_dict["models"]:
        m["perturbation"] = {"kind": "dependent_quadratic", "scale": {"base": 0.1, "ratio": 0.5}}
    path = tmp_path / "dep.json"
    path.write_text(json.dumps(clt_config_dict))
    res = runner.invoke(cli, ["bounds", "--config", str(path)])
    assert res.exit_code == 2


def test_seed_override_reaches_the_config(config_file):
    from hierstein.main import _load

    assert _load(str(config_file), 99, "pool").seed == 99
    assert _load(str(config_file), None).method == experiment.load_config(config_file).method


def test_invalid_law_parameters_exit_with_code_2(runner, tmp_path, clt_config_dict):
    clt_config_dict["models"][1]["initial"] = {"kind": "bernoulli", "p": 1.5}
    path = tmp_path / "bad_law.json"
    path.write_text(json.dumps(clt_config_dict))
    res = runner.invoke(cli, ["validate", "--config", str(path)])
    assert res.exit_code == 2
    assert "bernoulli" in res.output
