import yaml

from ahss.cli import EXIT_CONFIG, EXIT_DIVERGED, EXIT_OK, main
from ahss.runner import preset, save_config


def test_preset_writes_outputs(tmp_path, capsys):
    out = tmp_path / "ex1a"
    assert main(["preset", "ex1a", "--out", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "rms_ratio=" in text and "oracle checks passed" in text
    for name in ("timeseries.csv", "phasors.csv", "oracles.csv", "config.yaml", "summary.txt"):
        assert (out / name).exists()
    assert yaml.safe_load((out / "config.yaml").read_text())["name"] == "ex1a"


def test_run_from_config(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    save_config(preset("ex1a", "hss"), cfg)
    assert main(["run", str(cfg), "--out", str(tmp_path / "o"), "--duration", "3", "--quiet"]) == EXIT_OK
    assert capsys.readouterr().out == ""
    assert len((tmp_path / "o" / "timeseries.csv").read_text().splitlines()) == 3001


def test_strict_divergence_exit_code(tmp_path):
    args = ["preset", "ex2b", "--controller", "hss", "--out", str(tmp_path), "--quiet"]
    assert main(args) == EXIT_OK
    assert main(args + ["--strict"]) == EXIT_DIVERGED


def test_config_errors(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({"plant": {"duct": {}}, "tones": [{"omega": 251.0}], "timing": {"sample_rate": 100}}))
    assert main(["run", str(bad)]) == EXIT_CONFIG
    assert "error:" in capsys.readouterr().err


def test_sweep(tmp_path, capsys):
    assert main(["sweep", "--preset", "ex1a", "--phases", "8", "--steps", "100", "--out", str(tmp_path)]) == EXIT_OK
    assert "points=8" in capsys.readouterr().out
    assert len((tmp_path / "sweep.csv").read_text().splitlines()) == 9


def test_sweep_random_is_seeded(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        main(["sweep", "--random", "5", "--seed", "3", "--steps", "50", "--out", str(d), "--quiet"])
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()
