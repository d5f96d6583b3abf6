import json
import subprocess
import sys

import pytest

from dmlpg import cli


def test_parse_defaults_for_beam():
    cfg = cli.parse_config("problem = beam\n")
    assert cfg.method == "dmlpg1"
    assert cfg.m == 2
    assert cfg.eps == 4.0
    assert cfg.shape == "box"
    assert cfg.box_factor == 1.0
    assert cfg.ball_factor == 0.7


def test_parse_rejects_empty_problem():
    with pytest.raises(cli.ConfigError):
        cli.parse_config("method = dmlpg1\n")


def test_parse_rejects_unknown_key():
    with pytest.raises(cli.ConfigError, match="foo"):
        cli.parse_config("problem = beam\nfoo = 1\n")


def test_parse_reports_line_and_column():
    with pytest.raises(cli.ConfigError, match="line 3"):
        cli.parse_config("problem = beam\n# comment\nnot a pair\n")


def test_parse_rejects_bad_value_type():
    with pytest.raises(cli.ConfigError, match="levels"):
        cli.parse_config("problem = beam\nlevels = many\n")


def test_parse_rejects_bad_method():
    with pytest.raises(cli.ConfigError, match="method"):
        cli.parse_config("problem = beam\nmethod = fem\n")


def test_comments_and_blank_lines_ignored():
    cfg = cli.parse_config("\n# header\nproblem = beam  # trailing\n\nlevels = 2\n")
    assert cfg.levels == 2


@pytest.fixture()
def manufactured_cfg(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "problem = manufactured\n"
        "method = dmlpg1\n"
        "degree = 1\n"
        "levels = 1\n"
        f"out = {tmp_path / 'out'}\n")
    return path, tmp_path / "out"


def test_solve_writes_artifacts(manufactured_cfg):
    path, out = manufactured_cfg
    rc = cli.main(["solve", "--config", str(path)])
    assert rc == 0
    summary = json.loads((out / "summary.jsonl").read_text())
    assert summary["record"] == "run"
    assert summary["results"]["r_u"] < 1e-8
    assert summary["config"]["problem"] == "manufactured"


def test_study_csv_schema(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("problem = beam\nlevels = 2\n"
                   f"out = {tmp_path / 'out'}\n")
    rc = cli.main(["study", "--config", str(cfg)])
    assert rc == 0
    lines = (tmp_path / "out" / "convergence.csv").read_text().splitlines()
    assert lines[0] == "h,N,r_u,r_eps,t_assemble_s,t_solve_s,shape_evals,order_u,order_eps"
    assert len(lines) == 3
    assert lines[1].split(",")[-1] == "nan"   # undefined first-level order


def test_deterministic_artifacts(tmp_path):
    outputs = []
    for run in ("a", "b"):
        cfg = tmp_path / f"{run}.cfg"
        cfg.write_text("problem = beam\nlevels = 1\nrecord_times = false\n"
                       f"out = {tmp_path / run}\n")
        assert cli.main(["study", "--config", str(cfg)]) == 0
        outputs.append((tmp_path / run / "convergence.csv").read_bytes())
    assert outputs[0] == outputs[1]


def test_missing_config_file(tmp_path):
    rc = cli.main(["solve", "--config", str(tmp_path / "absent.cfg")])
    assert rc == 2


def test_bad_config_exit_code(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("problem = warp_drive\n")
    assert cli.main(["solve", "--config", str(cfg)]) == 2


def test_threads_flag_validated(manufactured_cfg):
    path, _ = manufactured_cfg
    assert cli.main(["solve", "--config", str(path), "--threads", "0"]) == 2


def test_console_entry_point(manufactured_cfg):
    path, out = manufactured_cfg
    proc = subprocess.run(
        [sys.executable, "-m", "dmlpg", "solve", "--config", str(path),
         "--out", str(out), "--threads", "2", "--seed", "1"],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "r_u" in proc.stdout
