"""Command-line client: artifacts on disk, exit codes, output routing."""

import json

import numpy as np
import pytest

from regulata import cli

FAST_RUN = {"scenario": "custom-lti", "t_end": 1.0}


def test_run_writes_artifact_tree(write_config, tmp_path, capsys):
    cfg = write_config(FAST_RUN, name="quick.cfg")
    out = tmp_path / "artifacts"
    assert cli.main(["run", cfg, "--out", str(out)]) == 0
    dest = out / "quick"
    assert (dest / "trajectory.csv").read_text().startswith("t,")
    report = json.loads((dest / "report.json").read_text())
    assert report["scenario"] == "custom-lti"
    svgs = list((dest / "plots").glob("*.svg"))
    assert svgs
    stdout = capsys.readouterr().out
    assert "custom-lti finished" in stdout
    assert str(dest) in stdout


def test_out_precedence(write_config, tmp_path, monkeypatch):
    flag_dir = tmp_path / "by_flag"
    env_dir = tmp_path / "by_env"
    cfg_dir = tmp_path / "by_config"
    cfg = write_config({**FAST_RUN, "out_dir": str(cfg_dir)}, name="p.cfg")

    monkeypatch.setenv("REGULATA_OUT", str(env_dir))
    assert cli.main(["run", cfg, "--out", str(flag_dir)]) == 0
    assert (flag_dir / "p" / "report.json").exists()
    assert not env_dir.exists()
    assert not cfg_dir.exists()

    assert cli.main(["run", cfg]) == 0
    assert (env_dir / "p" / "report.json").exists()
    assert not cfg_dir.exists()

    monkeypatch.delenv("REGULATA_OUT")
    assert cli.main(["run", cfg]) == 0
    assert (cfg_dir / "p" / "report.json").exists()

    plain = write_config(FAST_RUN, name="plain.cfg")
    monkeypatch.chdir(tmp_path)
    assert cli.main(["run", plain]) == 0
    assert (tmp_path / "out" / "plain" / "report.json").exists()


def test_emit_switches_reach_the_disk(write_config, tmp_path):
    cfg = write_config(
        {**FAST_RUN, "emit_csv": False, "emit_svg": False}, name="lean.cfg"
    )
    assert cli.main(["run", cfg, "--out", str(tmp_path / "o")]) == 0
    dest = tmp_path / "o" / "lean"
    assert (dest / "report.json").exists()
    assert not (dest / "trajectory.csv").exists()
    assert not (dest / "plots").exists()


def test_run_exit_codes(write_config, tmp_path, capsys):
    missing = str(tmp_path / "absent.cfg")
    assert cli.main(["run", missing, "--out", str(tmp_path)]) == 2

    bad = write_config({"scenario": "custom-lti", "bogus": 1}, name="bad.cfg")
    assert cli.main(["run", bad, "--out", str(tmp_path)]) == 2
    assert "bogus" in capsys.readouterr().err

    blowup = write_config(
        {"scenario": "frequency-estimation", "method": "rk4-fixed",
         "t_end": 2.0, "dt": 1e-3, "k1": 1e7},
        name="blowup.cfg",
    )
    with np.errstate(all="ignore"):
        assert cli.main(["run", blowup, "--out", str(tmp_path)]) == 3


def test_parallel_runs_and_worst_code_wins(write_config, tmp_path):
    a = write_config(FAST_RUN, name="a.cfg")
    b = write_config(FAST_RUN, name="b.cfg")
    out = tmp_path / "par"
    assert cli.main(["run", "--jobs", "2", "--out", str(out), a, b]) == 0
    assert (out / "a" / "report.json").exists()
    assert (out / "b" / "report.json").exists()

    bad = write_config({"scenario": "nope"}, name="broken.cfg")
    code = cli.main(["run", "--jobs", "2", "--out", str(out), a, bad])
    assert code == 2


def test_verify_table_and_exit_codes(write_config, capsys):
    good = write_config({"scenario": "frequency-estimation"}, name="ok.cfg")
    assert cli.main(["verify", good]) == 0
    out = capsys.readouterr().out
    assert "check" in out and "status" in out
    assert "recurrence-consistency" in out
    assert "FAIL" not in out

    bad = write_config(
        {"scenario": "frequency-estimation",
         "a_coeffs": [1.0, 0.0, 2.0, 0.0], "v_0": [1.0, 0.0, 0.0, 0.0]},
        name="dup.cfg",
    )
    assert cli.main(["verify", bad]) == 4
    captured = capsys.readouterr()
    assert "FAIL" in captured.out
    assert "verification failed" in captured.err


def test_bundled_config_through_cli(tmp_path, capsys):
    assert cli.main(["verify", "configs/frequency.cfg"]) == 0
    capsys.readouterr()
