import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from hierstein.errors import ConfigError, HierSteinError, InsufficientDataError
from hierstein.features import bounds, experiment, metrics
from hierstein.laws import STANDARD_NORMAL, make_discrete, standardize


# ---------- config ----------
def test_coefficients_are_parsed_symbolically(clt_config):
    assert clt_config.model("x").coefficients.values == [2**-0.5, 2**-0.5]
    assert clt_config.pool_size == 100_000
    assert clt_config.output.csv == "decay.csv"


@pytest.mark.parametrize(
    "patch",
    [
        {"colour": "blue"},
        {"n_max": 1},
        {"pool_size": 10},
        {"method": "magic"},
    ],
)
def test_bad_top_level_fields(clt_config_dict, patch):
    clt_config_dict.update(patch)
    with pytest.raises(ConfigError):
        experiment.parse_config(clt_config_dict)


def test_bad_models_are_rejected(clt_config_dict):
    bad = json.loads(json.dumps(clt_config_dict))
    bad["models"][1]["effect"] = "x"
    with pytest.raises(ConfigError, match="exactly one"):
        experiment.parse_config(bad)

    bad = json.loads(json.dumps(clt_config_dict))
    bad["models"][0]["k"] = 3
    with pytest.raises(ConfigError):
        experiment.parse_config(bad)

    bad = json.loads(json.dumps(clt_config_dict))
    bad["models"][0]["coefficients"]["values"] = ["sqrt(", "1"]
    with pytest.raises(ConfigError):
        experiment.parse_config(bad)

    bad = json.loads(json.dumps(clt_config_dict))
    bad["models"][0]["initial"] = {"kind": "bernoulli"}
    with pytest.raises(ConfigError, match="needs"):
        experiment.parse_config(bad)


def test_load_config(tmp_path, clt_config_dict):
    good = tmp_path / "clt.json"
    good.write_text(json.dumps(clt_config_dict))
    assert experiment.load_config(good).n_max == 8
    with pytest.raises(ConfigError):
        experiment.load_config(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigError):
        experiment.load_config(broken)


# ---------- decay fit ----------
def test_fit_recovers_a_pure_geometric_sequence():
    rows = [(n, 2.0 ** (-n / 2)) for n in range(9)]
    fit = experiment.fit_decay(rows)
    assert fit.gamma_fit == pytest.approx(2**-0.5, abs=1e-9)
    assert fit.c_fit == pytest.approx(1.0, abs=1e-9)
    c, g, band = fit
    assert band[0] <= g <= band[1]


def test_fit_recovers_constant_and_rate():
    fit = experiment.fit_decay([(n, 3.0 * 0.9**n) for n in range(2, 12)])
    assert fit.c_fit == pytest.approx(3.0, rel=1e-9)
    assert fit.gamma_fit == pytest.approx(0.9, rel=1e-9)


def test_fit_tolerates_small_noise():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        rows = [(n, 0.5 * 0.8**n * (1 + 0.01 * rng.standard_normal())) for n in range(9)]
        assert experiment.fit_decay(rows).gamma_fit == pytest.approx(0.8, abs=0.02)


def test_fit_needs_three_positive_rows():
    with pytest.raises(InsufficientDataError):
        experiment.fit_decay([(0, 1.0), (1, 0.5), (2, 0.0), (3, math.nan)])


def test_qualifying_rows():
    rows = [
        experiment.DecayRow(0, "exact", 1.0),
        experiment.DecayRow(2, "exact", 0.5),
        experiment.DecayRow(3, "pool", 0.1, 0.001),
        experiment.DecayRow(4, "pool", 0.01, 0.005),
        experiment.DecayRow(5, "pool", 0.01),
    ]
    assert experiment.qualifying_rows(rows, 2) == [(2, 0.5), (3, 0.1), (5, 0.01)]


def test_verdict_without_report_is_no_claim():
    assert experiment.verdict(None, 0.5) == experiment.VERDICT_NO_CLAIM


# ---------- pipeline ----------
def test_clt_run_decays_at_the_predicted_rate(clt_config):
    curve = experiment.run_experiment(clt_config, threads=1)
    exact = [r for r in curve.rows if r.method == "exact"]
    assert [r.n for r in exact] == list(range(9))
    z0 = standardize(make_discrete([-2.0, 0.0, 2.0], [1.0, 2.0, 1.0]))
    assert exact[0].d_n == metrics.w1(z0, STANDARD_NORMAL)
    assert all(r.r_x == 1.0 and r.gap_flag for r in exact)
    assert 0.66 <= curve.gamma_fit <= 0.76
    assert curve.gamma_total == pytest.approx(2**-0.5, abs=1e-9)
    assert curve.verdict == experiment.VERDICT_CONSISTENT


def test_gap_violation_gives_no_claim(clt_config_dict):
    clt_config_dict["n_max"] = 4
    clt_config_dict["models"][0]["initial"] = {
        "kind": "discrete", "values": [-math.sqrt(2.0), math.sqrt(2.0)], "weights": [1.0, 1.0],
    }
    curve = experiment.run_experiment(experiment.parse_config(clt_config_dict), threads=1)
    assert curve.verdict == experiment.VERDICT_NO_CLAIM
    assert not any(r.gap_flag for r in curve.rows)


def test_dependent_perturbation_runs_on_pools(clt_config_dict):
    for m in clt_config_dict["models"]:
        m["perturbation"] = {"kind": "dependent_quadratic", "scale": {"base": 0.2, "ratio": 0.5}}
    clt_config_dict.update(n_max=3, method="pool", pool_size=2_000, beta_draws=2_000)
    curve = experiment.run_experiment(experiment.parse_config(clt_config_dict), threads=2)
    assert curve.report is None
    assert curve.verdict == experiment.VERDICT_NO_CLAIM
    assert any("dependent" in n for n in curve.notes)
    assert len(curve.beta_estimates) == 4
    assert all(e.provenance == "pool" for e in curve.beta_estimates)
    text = experiment.report_text(curve, curve.report)
    assert "gamma_total=nan" in text


def test_pool_agrees_with_exact(clt_config_dict):
    clt_config_dict.update(n_max=5, method="both")
    curve = experiment.run_experiment(experiment.parse_config(clt_config_dict), threads=4)
    exact = {r.n: r.d_n for r in curve.rows if r.method == "exact"}
    pool = {r.n: r.d_n for r in curve.rows if r.method == "pool"}
    assert abs(pool[5] - exact[5]) <= 0.02
    # the fit always uses the exact rows when they exist
    assert curve.fit.gamma_fit == experiment.fit_decay(
        experiment.qualifying_rows([r for r in curve.rows if r.method == "exact"], 2)).gamma_fit


def test_pool_csv_is_identical_across_thread_counts(tmp_path, clt_config_dict):
    clt_config_dict.update(n_max=3, method="pool", pool_size=20_000, replicates=2)
    cfg = experiment.parse_config(clt_config_dict)
    blobs = []
    for threads in (1, 4, 8):
        curve = experiment.run_experiment(cfg, threads=threads)
        out = experiment.emit_report(curve, curve.report, tmp_path / f"t{threads}")
        blobs.append(out["csv"].read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]


def test_emit_report_writes_every_artifact(tmp_path, clt_config_dict):
    clt_config_dict.update(n_max=4, zero_bias_distances=True, beta_draws=1_000)
    curve = experiment.run_experiment(experiment.parse_config(clt_config_dict), threads=1)
    out = experiment.emit_report(curve, curve.report, tmp_path / "run")
    assert set(out) == {"csv", "report", "zero_bias", "beta"}
    with out["csv"].open() as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == experiment.DECAY_COLUMNS
    assert len(rows) == 6
    with out["zero_bias"].open() as fh:
        zb = list(csv.reader(fh))
    assert tuple(zb[0]) == experiment.ZERO_BIAS_COLUMNS
    assert all(r[3] == "1" for r in zb[1:])
    text = out["report"].read_text()
    for key in bounds.REPORT_KEYS:
        assert f"{key}=" in text
    assert text.endswith("\n") and "verdict=bound " in text


def test_emit_report_to_an_unwritable_path(tmp_path, clt_config_dict):
    clt_config_dict["n_max"] = 3
    curve = experiment.run_experiment(experiment.parse_config(clt_config_dict), threads=1)
    blocker = tmp_path / "file.txt"
    blocker.write_text("x")
    with pytest.raises(HierSteinError):
        experiment.emit_report(curve, curve.report, blocker / "sub")


def test_atom_counts_and_zero_bias_of_level(clt_config):
    assert experiment.exact_atom_counts(clt_config) == (257, 257)
    zb = experiment.zero_bias_of_level(clt_config, 0, "x")
    assert zb.cdf(0.0) == pytest.approx(0.5)
    assert zb.mean() == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(ConfigError):
        experiment.zero_bias_of_level(clt_config, 0, "w")


@pytest.mark.parametrize("name", ["clt.json", "lattice.json", "dependent.json"])
def test_shipped_configs_load(name):
    cfg = experiment.load_config(Path(__file__).resolve().parents[2] / "configs" / name)
    tm = experiment.build_models(cfg)
    assert tm.model_x.name == "x"
