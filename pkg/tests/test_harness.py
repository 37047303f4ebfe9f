import json

import pytest

from igenkrylov import cli, harness
from igenkrylov.config import (
    ExperimentConfig,
    GeometryConfig,
    InexactConfig,
    RegConfig,
    config_from_dict,
    config_from_json,
    preset,
)
from igenkrylov.errors import ConfigError


def tiny_config(tmp_path, **overrides):
    cfg = ExperimentConfig(
        geometry=GeometryConfig(n=16, angle_count=10, angle_step=18.0),
        max_iter=4,
        seed=42,
        output_dir=str(tmp_path / "out"),
    )
    for key, val in overrides.items():
        object.__setattr__(cfg, key, val)
    return cfg.validate()


def test_config_json_roundtrip(tmp_path):
    cfg = tiny_config(tmp_path)
    path = tmp_path / "cfg.json"
    cfg.to_json(path)
    back = config_from_json(path)
    assert back == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        config_from_dict({"schema_version": 1, "nonsense": 1})
    with pytest.raises(ConfigError):
        config_from_dict({"schema_version": 1, "geometry": {"sides": 3}})


def test_config_rejects_bad_schema_version():
    with pytest.raises(ConfigError):
        config_from_dict({"schema_version": 99})


def test_config_rejects_bad_values():
    with pytest.raises(ConfigError):
        config_from_dict({"schema_version": 1, "mode": "quantum"})
    with pytest.raises(ConfigError):
        config_from_dict({"schema_version": 1, "noise_level": -0.1})
    with pytest.raises(ConfigError):
        config_from_dict({"schema_version": 1, "reg": {"rule": "fixed"}})


def test_presets():
    assert preset("desk").geometry.n == 64
    assert preset("paper").geometry.n == 128
    with pytest.raises(ConfigError):
        preset("napkin")


def test_reconstruct_outputs_and_reproducibility(tmp_path):
    cfg = tiny_config(tmp_path)
    assert harness.cmd_reconstruct(cfg) == 0
    out = tmp_path / "out"
    history = (out / "history.csv").read_bytes()
    assert history.splitlines()[0] == b"iter,relerr,lambda,proj_residual"
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary) == {
        "schema_version",
        "config",
        "final_relerr",
        "min_relerr",
        "argmin_iter",
        "stop_reason",
        "lambda_final",
    }
    assert (out / "final.pgm").exists()
    assert (out / "timings.json").exists()

    cfg2 = tiny_config(tmp_path, output_dir=str(tmp_path / "out2"))
    harness.cmd_reconstruct(cfg2)
    assert (tmp_path / "out2" / "history.csv").read_bytes() == history
    s2 = json.loads((tmp_path / "out2" / "summary.json").read_text())
    summary["config"]["output_dir"] = s2["config"]["output_dir"]
    assert s2 == summary


def test_exact_reduction_identical_histories(tmp_path):
    cfg_gen = tiny_config(tmp_path, mode="gengk", output_dir=str(tmp_path / "gen"))
    cfg_izero = tiny_config(
        tmp_path,
        mode="igengk",
        inexactness=InexactConfig(mode="gaussian-entry", beta=0.0),
        output_dir=str(tmp_path / "izero"),
    )
    harness.cmd_reconstruct(cfg_gen)
    harness.cmd_reconstruct(cfg_izero)
    assert (tmp_path / "gen" / "history.csv").read_bytes() == (
        tmp_path / "izero" / "history.csv"
    ).read_bytes()


def test_verify_relations_csv_and_gates(tmp_path):
    cfg = tiny_config(
        tmp_path, experiment="verify-relations", max_iter=8, betas=(1e-2, 1e-4)
    )
    rc = harness.cmd_verify_relations(cfg)
    out = tmp_path / "out"
    lines = (out / "relations.csv").read_text().splitlines()
    assert lines[0] == "beta,err_adjoint,err_forward,err_Vorth,err_Uorth"
    assert len(lines) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["orthogonality_ok"] and summary["scaling_ok"]
    assert rc == 0


def test_verify_relations_zero_beta_row(tmp_path):
    cfg = tiny_config(tmp_path, experiment="verify-relations", max_iter=6, betas=(0.0,))
    assert harness.cmd_verify_relations(cfg) == 0
    rows = (tmp_path / "out" / "relations.csv").read_text().splitlines()[1]
    beta, adj, fwd, vorth, uorth = (float(v) for v in rows.split(","))
    assert beta == 0.0
    assert adj <= 1e-10 and fwd <= 1e-10 and vorth <= 1e-10 and uorth <= 1e-10


def test_compare_reg_shares_observation(tmp_path):
    cfg = tiny_config(
        tmp_path,
        experiment="compare-reg",
        mode="gengk",
        max_iter=4,
        reg=RegConfig(rule="optimal"),
    )
    assert harness.cmd_compare_reg(cfg) == 0
    out = tmp_path / "out"
    merged = (out / "compare.csv").read_text().splitlines()
    assert merged[0] == "iter,relerr_optimal,lambda_optimal,relerr_dp,lambda_dp,relerr_wgcv,lambda_wgcv"
    assert len(merged) == 5
    for rule in ("optimal", "dp", "wgcv"):
        assert (out / f"history_{rule}.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["final_relerr"]) == {"optimal", "dp", "wgcv"}


def test_inexact_angles_zero_jitter_bitwise(tmp_path):
    cfg = tiny_config(
        tmp_path,
        experiment="inexact-angles",
        mode="igengk",
        reg=RegConfig(rule="optimal"),
        angle_schedules=((1e-30, 1e-30),),
        max_iter=3,
    )
    assert harness.cmd_inexact_angles(cfg) == 0
    out = tmp_path / "out"
    exact = (out / "history_exact.csv").read_bytes()
    sched = (out / "history_sched0.csv").read_bytes()
    assert exact == sched
    comparison = (out / "comparison.csv").read_text().splitlines()
    assert comparison[0] == "iter,relerr_exact,relerr_sched0"


def test_verify_relations_gate_failure_exit_code(tmp_path):
    # at beta = 1 the relation errors saturate, so the linear-scaling gate trips
    cfg = tiny_config(
        tmp_path, experiment="verify-relations", max_iter=6, betas=(1.0, 1e-6)
    )
    assert harness.cmd_verify_relations(cfg) == 1
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert not summary["scaling_ok"]


def test_wgcv_history_differs_from_optimal(tmp_path):
    cfg = tiny_config(
        tmp_path,
        experiment="compare-reg",
        mode="gengk",
        max_iter=5,
        reg=RegConfig(rule="optimal"),
    )
    harness.cmd_compare_reg(cfg)
    out = tmp_path / "out"
    rows = (out / "compare.csv").read_text().splitlines()[1:]
    lam_opt = [r.split(",")[2] for r in rows]
    lam_wgcv = [r.split(",")[6] for r in rows]
    assert lam_opt != lam_wgcv


def test_reconstruct_with_angle_mode_uses_first_schedule(tmp_path):
    cfg = tiny_config(
        tmp_path,
        mode="igengk",
        inexactness=InexactConfig(mode="angle-perturbation"),
        angle_schedules=((1e-1, 1e-3),),
        max_iter=3,
    )
    assert harness.cmd_reconstruct(cfg) == 0
    assert (tmp_path / "out" / "history.csv").exists()


def test_thread_cap_does_not_change_results(tmp_path, monkeypatch):
    cfg = tiny_config(
        tmp_path, experiment="verify-relations", max_iter=5, betas=(1e-2, 1e-4)
    )
    harness.cmd_verify_relations(cfg)
    serial = (tmp_path / "out" / "relations.csv").read_bytes()
    monkeypatch.setenv("IGENKRYLOV_THREADS", "3")
    cfg2 = tiny_config(
        tmp_path,
        experiment="verify-relations",
        max_iter=5,
        betas=(1e-2, 1e-4),
        output_dir=str(tmp_path / "out_mt"),
    )
    harness.cmd_verify_relations(cfg2)
    assert (tmp_path / "out_mt" / "relations.csv").read_bytes() == serial


def test_cli_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["reconstruct", "--config", str(bad)]) == 2
    good_but_wrong = tmp_path / "wrong.json"
    good_but_wrong.write_text(json.dumps({"schema_version": 1, "mode": "martian"}))
    assert cli.main(["reconstruct", "--config", str(good_but_wrong)]) == 2


def test_cli_runs_tiny_reconstruction(tmp_path):
    cfg = tiny_config(tmp_path)
    path = tmp_path / "cfg.json"
    cfg.to_json(path)
    rc = cli.main(
        ["reconstruct", "--config", str(path), "--out", str(tmp_path / "cli_out"), "--max-iter", "3"]
    )
    assert rc == 0
    history = (tmp_path / "cli_out" / "history.csv").read_text().splitlines()
    assert len(history) == 4


def test_cli_flag_overrides(tmp_path):
    cfg = tiny_config(tmp_path)
    path = tmp_path / "cfg.json"
    cfg.to_json(path)
    args = cli.build_parser().parse_args(
        ["reconstruct", "--config", str(path), "--reg", "opt", "--mode", "gengk", "--seed", "7"]
    )
    assembled = cli.assemble_config(args)
    assert assembled.reg.rule == "optimal"
    assert assembled.mode == "gengk"
    assert assembled.seed == 7
