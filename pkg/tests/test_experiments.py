import csv
import json
from pathlib import Path

import pytest

from nearfield_ris.config import (
    ConfigError,
    ExperimentConfig,
    config_echo,
    config_hash,
    dumps_config,
    parse_config,
    with_override,
)
from nearfield_ris.experiments.cli import main
from nearfield_ris.experiments.runner import run

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
TINY = {"training": {"episodes": 2, "t_macro": 2, "n_macro": 4, "hdrl_batch": 8}}


def _read_csv(path: Path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config_hash=")
    return list(csv.DictReader(lines[1:]))


def test_empty_document_gives_defaults():
    assert parse_config("") == ExperimentConfig()
    assert parse_config("{}") == ExperimentConfig()


def test_table1_roundtrips_and_echoes_timescales():
    cfg = parse_config((CONFIGS / "table1.json").read_text())
    assert parse_config(dumps_config(cfg)) == cfg
    assert cfg.system.n_bs == 1024 and cfg.system.n_ris == 100 and cfg.system.n_ues == 10
    echo = config_echo(cfg)
    assert echo["training"]["n_macro"] == 154
    assert echo["derived"]["macro_period_ms"] == 154.0


@pytest.mark.parametrize("text,path", [
    ('{"training": {"n_macro": 0}}', "training.n_macro"),
    ('{"system": {"bogus": 1}}', "system.bogus"),
    ('{"system": {"n_ues": "two"}}', "system.n_ues"),
])
def test_bad_documents_name_the_path(text, path):
    with pytest.raises(ConfigError, match=path):
        parse_config(text)


def test_patch_tiling_is_validated():
    with pytest.raises(ConfigError, match="tile"):
        parse_config('{"vit": {"patch": 5}}')


def test_override_and_hash():
    cfg = ExperimentConfig()
    other = with_override(cfg, "system.p_max_dbm", 30.0)
    assert other.system.p_max_dbm == 30.0
    assert config_hash(other) != config_hash(cfg)
    with pytest.raises(ConfigError):
        with_override(cfg, "system.nope", 1)


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"training": {"n_macro": 0}}')
    assert main(["--config", str(bad), "--mode", "flops", "--out", str(tmp_path), "--quiet"]) == 2
    assert main(["--config", str(tmp_path / "missing.json"), "--mode", "flops",
                 "--out", str(tmp_path), "--quiet"]) == 2
    assert main(["--mode", "train-hdrl", "--out", str(tmp_path / "empty"), "--quiet"]) == 3
    assert main(["--mode", "flops", "--out", str(tmp_path), "--quiet"]) == 0


def test_flops_mode_reports_reference_rows(tmp_path):
    run(ExperimentConfig(), "flops", tmp_path)
    rows = _read_csv(tmp_path / "flops.csv")
    ref = {r["component"]: r for r in rows if r["scope"] == "reference_scale"}
    assert ref["total"]["reference_gflops"] == "5.09"
    assert set(ref) == {"csi_transformer", "vit", "hdrl_agent", "total"}


def test_gen_data_files(tmp_path):
    cfg = parse_config(json.dumps({"scenario": {"n_samples": 6, "n_worlds": 2},
                                   "csi": {"n_samples": 4}}))
    run(cfg, "gen-data", tmp_path, seed=3)
    header = (tmp_path / "blockage_manifest.csv").read_text().splitlines()[0]
    assert f"config_hash={config_hash(with_override(cfg, 'seed', 3))}" in header
    assert "seed=3" in header
    rows = _read_csv(tmp_path / "blockage_manifest.csv")
    assert len(rows) == 6 and "los_available_ue1" in rows[0]
    assert (tmp_path / "blockage.nfds").read_bytes()[:4] == b"NFDS"


def _sweep(tmp_path, parameter, values, extra=None):
    doc = dict(TINY, sweep={"parameter": parameter, "values": values, "pipeline": "oracle"})
    doc.update(extra or {})
    run(parse_config(json.dumps(doc)), "sweep", tmp_path)
    return _read_csv(tmp_path / "sweep.csv")


def test_power_sweep_oracle_is_monotone(tmp_path):
    rows = _sweep(tmp_path, "system.p_max_dbm", [25, 30, 35])
    se = [float(r["mean_sum_se_bps_hz"]) for r in rows]
    assert se == sorted(se) and se[0] < se[-1]
    assert len({r["config_hash"] for r in rows}) == 3


def test_antenna_sweep_oracle_gains(tmp_path):
    rows = _sweep(tmp_path, "system.bs_rows", [4, 16], {"system": {"bs_cols": 4}})
    assert [int(r["n_bs"]) for r in rows] == [16, 64]
    assert float(rows[1]["mean_sum_se_bps_hz"]) > float(rows[0]["mean_sum_se_bps_hz"])


def test_single_value_sweep_equals_plain_run(tmp_path):
    rows = _sweep(tmp_path / "s", "system.p_max_dbm", [35.0])
    doc = dict(TINY, sweep={"parameter": "system.p_max_dbm", "values": [35.0],
                            "pipeline": "oracle"})
    cfg = parse_config(json.dumps(doc))
    from nearfield_ris.control.env import build_system
    from nearfield_ris.control.hdrl import run_agent
    rec = run_agent("oracle", cfg, build_system(cfg.system), None, cfg.seed).record
    assert float(rows[0]["mean_sum_se_bps_hz"]) == rec.summary()["mean_sum_se"]
    assert rows[0]["config_hash"] == config_hash(cfg)


def test_summary_json_matches_streams(tmp_path):
    _sweep(tmp_path, "system.p_max_dbm", [30])
    d = tmp_path / "sweep" / "system.p_max_dbm=30.0"
    summary = json.loads((d / "oracle_summary.json").read_text())["summary"]
    rows = _read_csv(d / "oracle_micro.csv")
    mean = sum(float(r["sum_se_bps_hz"]) for r in rows) / len(rows)
    assert summary["mean_sum_se"] == pytest.approx(mean, abs=1e-10)
