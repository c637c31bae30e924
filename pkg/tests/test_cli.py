import json

import pytest

from sle_lab.cli import main, parse_hull_pairs, read_config
from sle_lab.loewner import HalfDisk, Polygon


def write_cfg(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text)
    return str(p)


def test_help(capsys):
    assert main(["--help"]) == 0
    assert "sle-lab" in capsys.readouterr().out


def test_unknown_flag(capsys):
    assert main(["martingale", "--bogus"]) == 2
    assert "ERROR: unknown flag --bogus" in capsys.readouterr().err


def test_unknown_command():
    assert main(["nonsense"]) == 2


def test_unknown_config_key(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "kappa = 3\nfrobnicate = 1\n")
    assert main(["martingale", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "unknown key 'frobnicate'" in capsys.readouterr().err


def test_invalid_parameter(tmp_path):
    assert main(["martingale", "--kappa", "-1", "--out", str(tmp_path)]) == 2
    bad = write_cfg(tmp_path, "radius1 = 0.6\nradius2 = 0.6\n")
    assert main(["martingale", "--config", bad, "--out", str(tmp_path)]) == 2


def test_config_parsing(tmp_path):
    cfg = write_cfg(tmp_path, "# comment\nkappa = 2.5  # inline\nsamples = 7\ntbar2_zero = yes\n")
    assert read_config(cfg) == {"kappa": 2.5, "samples": 7, "tbar2_zero": True}
    pairs = parse_hull_pairs("halfdisk(0,0.3) halfdisk(1,0.25); "
                             "polygon((-0.2,0),(0,0.3),(0.2,0)) halfdisk(1,0.2)")
    assert pairs[0] == (HalfDisk(0.0, 0.3), HalfDisk(1.0, 0.25))
    assert isinstance(pairs[1][0], Polygon)


def test_martingale_run_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["martingale", "--samples", "6", "--seed", "3", "--kappa", "3"]
    codes = {main(args + ["--out", str(a)]), main(args + ["--out", str(b), "--workers", "2"])}
    assert codes <= {0, 1}
    ja, jb = (d / "martingale.json" for d in (a, b))
    assert ja.read_bytes() == jb.read_bytes()
    payload = json.loads(ja.read_text())
    for key in ("mean", "stderr", "n", "discards", "pass"):
        assert key in payload
    assert (a / "martingale.log").exists()


def test_csv_and_samples(tmp_path):
    code = main(["martingale", "--samples", "5", "--format", "csv", "--dump-samples",
                 "--out", str(tmp_path)])
    assert code in (0, 1)
    assert (tmp_path / "martingale.csv").read_text().startswith("suite,test,")
    assert (tmp_path / "martingale_records.csv").exists()
    assert (tmp_path / "martingale_samples.csv").exists()


def test_trace_outputs(tmp_path):
    assert main(["trace", "--svg", "--out", str(tmp_path), "--format", "csv"]) == 0
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert lines[0] == "t,re,im" and len(lines) == 1002
    assert (tmp_path / "trace.svg").read_text().lstrip().startswith("<svg")


def test_failing_test_exits_with_one(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "z_threshold = 0\nsamples = 5\n")
    assert main(["martingale", "--config", cfg, "--out", str(tmp_path)]) == 1
    assert "FAIL martingale.mean_M" in capsys.readouterr().out


def test_numerical_abort_exits_with_three(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "n_steps = 1\nsamples = 4\n")
    assert main(["martingale", "--config", cfg, "--out", str(tmp_path)]) == 3
    assert "ERROR" in capsys.readouterr().err


@pytest.mark.parametrize("command", ["mstar", "identities"])
def test_other_suites_run(tmp_path, command):
    cfg = write_cfg(tmp_path, "samples = 2\nidentity_samples = 1\n")
    assert main([command, "--config", cfg, "--out", str(tmp_path), "--svg"]) in (0, 1)
    assert (tmp_path / f"{command}.json").exists()
