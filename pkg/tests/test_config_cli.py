import json

import pytest

from nvopt.cli import main
from nvopt.config import Config, ConfigError, config_hash, emit_config, load_config, parse_config
from nvopt.io import read_csv
from nvopt.model import PhysicalConstants


def test_defaults_match_library():
    a, b = Config().physical_constants(), PhysicalConstants()
    for name in ("D_gs", "D_es", "Delta_ss", "Delta_pp", "l_z", "zeeman_gs"):
        assert getattr(a, name) == pytest.approx(getattr(b, name), rel=1e-12)


def test_misspelled_key_rejected():
    with pytest.raises(ConfigError) as e:
        load_config({"experiments": {"optimize": {"lamda": -0.1}}})
    assert "experiments.optimize.lamda: unknown key" in str(e.value)


def test_all_problems_reported():
    with pytest.raises(ConfigError) as e:
        load_config({"dt": -1, "convention": "nope", "experiments": {"optimize": {"methods": ["x"]}}})
    assert len(e.value.problems) == 3


def test_round_trip(tmp_path):
    cfg = load_config({"seed": 4, "experiments": {"optimize": {"T_list": [1.0, 2.0], "lam": -0.5}}})
    p = tmp_path / "c.json"
    p.write_text(json.dumps(emit_config(cfg)))
    again = parse_config(p)
    assert again == cfg and config_hash(again) == config_hash(cfg)


def test_missing_and_invalid_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError, match="JSON"):
        parse_config(bad)


def test_hash_ignores_output_location():
    a = load_config({"output_dir": "x", "workers": 1})
    b = load_config({"output_dir": "y", "workers": 4})
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(load_config({"seed": 1}))


def test_experiment_specs():
    cfg = Config()
    assert cfg.experiment_spec("resolution").resolution == 0.05
    assert cfg.experiment_spec("optimize").resolution is None
    rob = cfg.experiment_spec("robustness")
    assert len(rob.dOmega) == 11 and rob.dOmega[5] == 0.0 and rob.dDelta[0] == -0.2


TINY = ["--T", "0.5", "--restarts", "1", "--max-iters", "3", "--dt", "0.01"]


def _tiny_config(tmp_path):
    p = tmp_path / "tiny.json"
    p.write_text(json.dumps({"experiments": {"optimize": {"dims": 4, "nm_max_evals": 8}}}))
    return str(p)


def test_cli_optimize(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["optimize", "--config", _tiny_config(tmp_path), "--out", str(out), *TINY])
    assert code == 0
    for name in ("spec.json", "results.csv", "summary.csv", "MANIFEST"):
        assert (out / name).is_file()
    meta, cols, rows = read_csv(out / "results.csv")
    assert meta["convention"] == "plain" and len(meta["config_hash"]) == 64
    assert len(rows) == 4 and cols[0] == "method"
    assert len(list((out / "runs").glob("*.json"))) == 4
    assert "best p3" in capsys.readouterr().out


def test_cli_results_byte_identical(tmp_path):
    cfg = _tiny_config(tmp_path)
    for d in ("a", "b"):
        assert main(["optimize", "--config", cfg, "--out", str(tmp_path / d), "--method", "rabi-detuning", *TINY]) == 0
    assert (tmp_path / "a/results.csv").read_bytes() == (tmp_path / "b/results.csv").read_bytes()


def test_cli_usage_errors(tmp_path, capsys):
    assert main(["optimize", "--method", "newton"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["optimize", "--config", str(tmp_path / "none.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"sed": 1}))
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "sed: unknown key" in capsys.readouterr().err


def test_cli_runtime_failure(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"experiments": {"simulate": {"pulse_file": str(tmp_path / "gone.json")}}}))
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "simulate failed" in capsys.readouterr().err


def test_cli_simulate_and_pulse_file(tmp_path):
    out = tmp_path / "sim"
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"experiments": {"simulate": {"dims": 4, "T": 1.0, "stride": 10}}}))
    assert main(["simulate", "--config", str(p), "--out", str(out)]) == 0
    _, cols, rows = read_csv(out / "trajectory.csv")
    assert cols[0] == "t_ns" and cols[-1] == "trace" and float(rows[-1][0]) == pytest.approx(1.0)
    p.write_text(json.dumps({"experiments": {"simulate": {"dims": 4, "pulse_file": str(out / "pulse.json")}}}))
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "sim2")]) == 0
    assert read_csv(out / "results.csv")[2] == read_csv(tmp_path / "sim2/results.csv")[2]


def test_cli_validate(tmp_path):
    assert main(["validate", "--out", str(tmp_path / "v")]) == 0
    _, _, rows = read_csv(tmp_path / "v/results.csv")
    assert all(r[-1] == "true" for r in rows)


def test_cli_workers_env(tmp_path, monkeypatch):
    monkeypatch.setenv("NVOPT_WORKERS", "2")
    cfg = _tiny_config(tmp_path)
    assert main(["optimize", "--config", cfg, "--out", str(tmp_path / "p"), "--method", "rabi-resonant", *TINY]) == 0
    monkeypatch.delenv("NVOPT_WORKERS")
    assert main(["optimize", "--config", cfg, "--out", str(tmp_path / "s"), "--method", "rabi-resonant", *TINY]) == 0
    assert (tmp_path / "p/results.csv").read_bytes() == (tmp_path / "s/results.csv").read_bytes()
