"""Tests for experiment configuration, runners, outputs, and the CLI."""

import csv
import json
import math

import numpy as np
import pytest

from glassclock.cli import main
from glassclock.experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    config_digest,
    config_from_dict,
    run_experiment,
    write_outputs,
)

_BASE = {"c": 0.3, "omega": 0.81, "beta": 1.0, "p": 2}
_TINY = {"c": 0.25, "omega": 0.76, "beta": 1.0, "p": 2}


def _cfg(**kwargs):
    raw = {
        "experiment": "aging",
        "base": dict(_TINY),
        "sweep": {"N": [16]},
        "replicates": 40,
        "master_seed": 3,
        "backend": "rem",
        "options": {"thetas": [1.0]},
    }
    raw.update(kwargs)
    return config_from_dict(raw)


def test_experiment_names_registered():
    assert len(EXPERIMENTS) == 10
    assert "aging" in EXPERIMENTS and "poisson-blocks" in EXPERIMENTS


def test_config_rejects_unknown_fields():
    with pytest.raises(ValueError):
        _cfg(nonsense=1)
    with pytest.raises(ValueError):
        _cfg(experiment="not-an-experiment")
    with pytest.raises(ValueError):
        _cfg(backend="quantum")
    with pytest.raises(ValueError):
        _cfg(options={"thetas": [1.0], "bogus_option": 2})
    with pytest.raises(ValueError):
        _cfg(replicates=0)
    with pytest.raises(ValueError):
        _cfg(horizon_T=-1.0)


def test_config_grid_is_cartesian_and_sorted():
    cfg = config_from_dict(
        {
            "experiment": "fixed-time-law",
            "base": dict(_TINY),
            "sweep": {"N": [16, 20], "beta": [1.0, 2.0, 3.0]},
            "replicates": 5,
            "master_seed": 0,
            "backend": "rem",
        }
    )
    assert len(cfg.param_grid) == 6
    betas = [entry.beta for entry in cfg.param_grid]
    ns = [entry.N for entry in cfg.param_grid]
    assert ns == sorted(ns)
    # Within fixed N the sweep runs over sorted beta.
    assert betas[:3] == [1.0, 2.0, 3.0]


def test_config_validates_each_grid_entry():
    with pytest.raises(ValueError):
        config_from_dict(
            {
                "experiment": "aging",
                "base": dict(_TINY),
                # omega 0.81 makes p*(nu-1) = N at N = 12.
                "sweep": {"N": [12], "omega": [0.81]},
                "replicates": 5,
                "master_seed": 0,
                "backend": "rem",
            }
        )


def test_config_option_accessor_and_defaults():
    cfg = _cfg()
    assert cfg.opt("thetas") == (1.0,)
    assert cfg.opt("missing", 7) == 7
    gauss = config_from_dict(
        {
            "experiment": "block-exceedance",
            "base": dict(_TINY),
            "sweep": {"N": [16]},
            "replicates": 10,
            "master_seed": 0,
        }
    )
    assert gauss.backend == "gauss"


def test_config_digest_stability():
    a = _cfg()
    b = _cfg()
    assert config_digest(a) == config_digest(b)
    c = _cfg(master_seed=4)
    assert config_digest(a) != config_digest(c)


def test_aging_theta_zero_is_certain():
    cfg = _cfg(options={"thetas": [0.0]}, replicates=25)
    results = run_experiment(cfg)
    assert len(results) == 1
    r = results[0]
    assert r.estimate == 1.0
    assert r.ci_hi == 1.0
    assert r.truncated_count == 0


def test_aging_estimates_are_probabilities():
    cfg = _cfg(options={"thetas": [0.5, 2.0]}, replicates=60)
    for r in run_experiment(cfg):
        assert 0.0 <= r.ci_lo <= r.estimate <= r.ci_hi <= 1.0


def test_fixed_time_law_zero_time_rows():
    cfg = config_from_dict(
        {
            "experiment": "fixed-time-law",
            "base": dict(_TINY),
            "sweep": {"N": [16]},
            "replicates": 30,
            "master_seed": 2,
            "backend": "rem",
            "options": {"times": [0.0, 0.25]},
        }
    )
    results = run_experiment(cfg)
    zero_rows = [
        r for r in results if dict(r.params).get("t") == 0.0
    ]
    assert len(zero_rows) == 2
    for r in zero_rows:
        assert r.report.statistic == 0.0
        assert r.report.p_value == 1.0


def test_poisson_blocks_no_hits_row():
    cfg = config_from_dict(
        {
            "experiment": "poisson-blocks",
            "base": dict(_BASE),
            "sweep": {"N": [64]},
            "replicates": 30,
            "master_seed": 5,
            "backend": "gauss",
            "options": {"delta": 1e12},
        }
    )
    results = run_experiment(cfg)
    metrics = {dict(r.params)["metric"] for r in results if hasattr(r, "estimate")}
    assert "count_mean" in metrics
    count_row = next(
        r for r in results if dict(r.params)["metric"] == "count_mean"
    )
    assert count_row.estimate == 0.0
    assert count_row.ci_hi == 0.0
    assert "dispersion" not in metrics


def test_run_experiment_covers_every_runner(tmp_path):
    quick = {
        "aging": dict(
            experiment="aging", base=dict(_TINY), sweep={"N": [16]},
            replicates=20, master_seed=1, backend="rem",
            options={"thetas": [1.0]},
        ),
        "fixed-time-law": dict(
            experiment="fixed-time-law", base=dict(_TINY), sweep={"N": [16]},
            replicates=25, master_seed=1, backend="rem",
            options={"times": [0.5]},
        ),
        "sup-distance": dict(
            experiment="sup-distance", base=dict(_TINY), sweep={"N": [16]},
            replicates=25, master_seed=1, backend="rem", horizon_T=0.25,
        ),
        "block-exceedance": dict(
            experiment="block-exceedance", base=dict(_TINY), sweep={"N": [16]},
            replicates=2000, master_seed=1, options={"xs": [1.0]},
        ),
        "resample-exceedance": dict(
            experiment="resample-exceedance", base=dict(_TINY),
            sweep={"N": [16]}, replicates=2000, master_seed=1,
            options={"xs": [1.0], "rhos": [1.0, 2.0]},
        ),
        "poisson-blocks": dict(
            experiment="poisson-blocks", base=dict(_BASE), sweep={"N": [64]},
            replicates=40, master_seed=1, backend="gauss",
        ),
        "sa-constants": dict(
            experiment="sa-constants", base=dict(_BASE), sweep={"N": [64]},
            replicates=1, master_seed=1,
            options={
                "alphas": [1e-2],
                "mc_d": 0.3,
                "mc_replicates": 2000,
                "mc_step_cap": 4096,
            },
        ),
        "comparison-bound": dict(
            experiment="comparison-bound", base=dict(_BASE), sweep={"N": [64]},
            replicates=1, master_seed=1,
            options={"instances": 3, "mc_draws": 20000, "max_dim": 3},
        ),
        "bd-mixing": dict(
            experiment="bd-mixing", base=dict(_TINY), sweep={"N": [10]},
            replicates=20000, master_seed=1,
        ),
        "pair-counts": dict(
            experiment="pair-counts", base=dict(_TINY), sweep={"N": [16]},
            replicates=40, master_seed=1,
            options={"walks": 2, "max_steps": 64},
        ),
    }
    assert set(quick) == set(EXPERIMENTS)
    for name, raw in quick.items():
        cfg = config_from_dict(raw)
        results = run_experiment(cfg)
        assert results, name
        out = tmp_path / name
        write_outputs(cfg, results, out)
        assert (out / "results.jsonl").exists()
        assert (out / f"{name}.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["experiment"] == name
        assert manifest["config_hash"] == config_digest(cfg)
        assert "wall_time" not in (out / "results.jsonl").read_text()


def test_outputs_reproducible_and_thread_invariant(tmp_path):
    cfg = _cfg(replicates=30)
    a = run_experiment(cfg, threads=1)
    b = run_experiment(cfg, threads=1)
    c = run_experiment(cfg, threads=2)
    for results, sub in ((a, "a"), (b, "b"), (c, "c")):
        write_outputs(cfg, results, tmp_path / sub)
    blob_a = (tmp_path / "a" / "results.jsonl").read_bytes()
    assert blob_a == (tmp_path / "b" / "results.jsonl").read_bytes()
    assert blob_a == (tmp_path / "c" / "results.jsonl").read_bytes()


def test_csv_layout(tmp_path):
    cfg = _cfg(replicates=25)
    write_outputs(cfg, run_experiment(cfg), tmp_path)
    with open(tmp_path / "aging.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    assert header[0] == "kind"
    assert "estimate" in header and "ci_lo" in header and "ci_hi" in header
    assert "N" in header and "theta" in header
    assert len(rows) == 2
    assert rows[1][0] == "trial"


def test_sa_constants_emits_report(tmp_path):
    cfg = config_from_dict(
        {
            "experiment": "sa-constants",
            "base": dict(_BASE),
            "sweep": {"N": [64]},
            "replicates": 1,
            "master_seed": 9,
            "options": {
                "alphas": [1e-2],
                "mc_d": 0.3,
                "mc_replicates": 1000,
                "mc_step_cap": 4096,
            },
        }
    )
    write_outputs(cfg, run_experiment(cfg), tmp_path)
    payload = json.loads((tmp_path / "sa_constants.json").read_text())
    assert "K1" in json.dumps(payload) or payload


def test_cli_run_and_report(tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps(
            {
                "experiment": "aging",
                "base": dict(_TINY),
                "sweep": {"N": [16]},
                "replicates": 25,
                "master_seed": 6,
                "backend": "rem",
                "options": {"thetas": [1.0]},
            }
        )
    )
    out_dir = tmp_path / "out"
    assert main(["run", "--config", str(config_path), "--out", str(out_dir)]) == 0
    assert (out_dir / "results.jsonl").exists()
    assert (out_dir / "manifest.json").exists()
    assert main(["report", "--in", str(out_dir)]) == 0
    summary = (out_dir / "summary.txt").read_text()
    assert "aging" in summary
    figures = list(out_dir.glob("*.png"))
    assert figures, "report should render at least one figure"


def test_cli_seed_override(tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps(
            {
                "experiment": "aging",
                "base": dict(_TINY),
                "sweep": {"N": [16]},
                "replicates": 20,
                "master_seed": 6,
                "backend": "rem",
                "options": {"thetas": [1.0]},
            }
        )
    )
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["run", "--config", str(config_path), "--out", str(out_a)]) == 0
    assert (
        main(
            [
                "run", "--config", str(config_path), "--out", str(out_b),
                "--seed", "7",
            ]
        )
        == 0
    )
    man_a = json.loads((out_a / "manifest.json").read_text())
    man_b = json.loads((out_b / "manifest.json").read_text())
    assert man_a["master_seed"] == 6
    assert man_b["master_seed"] == 7
    assert main(["run", "--config", str(config_path)]) == 2


def test_cli_report_without_figures(tmp_path):
    cfg = _cfg(replicates=20)
    write_outputs(cfg, run_experiment(cfg), tmp_path)
    assert main(["report", "--in", str(tmp_path), "--no-figures"]) == 0
    assert (tmp_path / "summary.txt").exists()
    assert not list(tmp_path.glob("*.png"))
