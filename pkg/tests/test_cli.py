import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from bessel_harmonics import cli
from bessel_harmonics.errors import ContractError
from bessel_harmonics.measure_grid import DistributionProfile


def run(capsys, *argv):
    code = cli.run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_kernel_matches_closed_form(capsys):
    code, out, _ = run(capsys, "kernel", "--lambda", "0", "--t", "1", "--x", "1", "--y", "1")
    assert code == 0
    want = (1 + math.exp(-1.0)) / math.sqrt(4 * math.pi)
    assert float(rows(out)[0]["value"]) == pytest.approx(want, rel=1e-14)


def test_kernel_several_points(capsys):
    code, out, _ = run(capsys, "kernel", "--lambda", "0.3,0.7", "--t", "0.5", "--x", "1,1,2,0.5", "--y", "1.2,0.8,2,0.4")
    assert code == 0
    assert len(rows(out)) == 2


def test_invalid_lambda_exit_2(capsys, tmp_path):
    code, _, err = run(capsys, "kernel", "--lambda", "-0.6", "--t", "1", "--x", "1", "--y", "1")
    assert code == 2
    assert "lambda > -1/2" in err
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"lambda": [-0.6], "t": 1.0, "x": [1.0], "y": [1.0]}))
    code, _, err = run(capsys, "kernel", "--config", str(cfg))
    assert code == 2 and "lambda > -1/2" in err


def test_usage_errors(capsys):
    assert run(capsys, "foo")[0] == 64
    assert run(capsys)[0] == 64
    assert run(capsys, "kernel", "--bogus")[0] == 2
    assert run(capsys, "kernel", "--lambda", "0", "--t", "-1", "--x", "1", "--y", "1")[0] == 2
    assert run(capsys, "verify", "--id", "A9")[0] == 2


@pytest.mark.parametrize("command", list(cli.COMMANDS))
def test_every_command_has_help(capsys, command):
    code, out, _ = run(capsys, command, "--help")
    assert code == 0
    assert "--lambda" in out and "--out" in out


def test_unwritable_output_exit_74(capsys, tmp_path):
    code, _, _ = run(capsys, "kernel", "--lambda", "0", "--t", "1", "--x", "1", "--y", "1",
                     "--out", str(tmp_path / "missing" / "k.csv"))
    assert code == 74
    assert run(capsys, "kernel", "--config", str(tmp_path / "none.json"))[0] == 74


def test_verify_json(capsys):
    code, out, _ = run(capsys, "verify", "--id", "A0", "--lambda", "0.5", "--ppd", "4", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    rep = doc["reports"][0]
    assert rep["id"] == "A0" and rep["lambda"] == 0.5
    assert set(rep) == {"id", "lambda", "samples", "sup_ratio", "argmax", "drift"}
    assert doc["config"]["ppd"] == 4


def test_config_merge_and_override(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"lambda": [0.0], "t": 1.0, "x": [1.0], "y": [1.0], "format": "json"}))
    code, out, _ = run(capsys, "kernel", "--config", str(cfg), "--t", "2")
    assert code == 0
    doc = json.loads(out)
    assert doc["config"]["t"] == 2.0
    want = (1 + math.exp(-0.5)) / math.sqrt(8 * math.pi)
    assert doc["records"][0]["value"] == pytest.approx(want, rel=1e-14)


def test_csv_output_gets_config_sidecar(capsys, tmp_path):
    out = tmp_path / "k.csv"
    assert run(capsys, "kernel", "--lambda", "0", "--t", "1", "--x", "1", "--y", "1", "--out", str(out))[0] == 0
    side = json.loads((tmp_path / "k.csv.config.json").read_text())
    assert side["command"] == "kernel" and side["lambda"] == "0"


@pytest.mark.parametrize(
    "argv,header",
    [
        (["apply", "--lambda", "0.3", "--t", "0.5", "--x", "1.0,1.2"], ["t", "x1", "value"]),
        (["maximal", "--lambda", "0.3", "--x", "1.0", "--width", "0.4"], ["x1", "value", "t_star"]),
        (["gfun", "--lambda", "0.3", "--x", "1.1"], ["x1", "value"]),
        (["riesz", "--lambda", "0.3", "--x", "1.1", "--eps", "0.1,0.05"], ["x1", "eps", "value"]),
        (["frac", "--lambda", "0,0", "--x", "1,1", "--y", "0.5,2", "--beta", "0.5", "--form", "plain"],
         ["x1", "x2", "y1", "y2", "value"]),
        (["strongtype", "--lambda", "0.3", "--operator", "semigroup", "--h", "0.4,0.2"], ["h", "ratio"]),
        (["converge", "--lambda", "0.3", "--x", "1.0", "--t", "0.01,0.005"], ["t", "x1", "error"]),
        (["weaktype", "--lambda", "0.3", "--operator", "l_operator", "--h", "0.1", "--centers", "interior"],
         ["h", "gamma", "measure", "gamma_times_measure"]),
    ],
)
def test_commands_emit_tables(capsys, argv, header):
    code, out, _ = run(capsys, *argv)
    assert code == 0
    table = rows(out)
    assert table and list(table[0]) == header
    assert all(math.isfinite(float(v)) for r in table for v in r.values())


def test_frac_plain_matches_reflection_sum(capsys):
    code, out, _ = run(capsys, "frac", "--lambda", "0,0", "--x", "1,1", "--y", "0.5,2", "--beta", "0.5", "--form", "plain")
    x, y = np.array([1.0, 1.0]), np.array([0.5, 2.0])
    want = sum(1 / np.linalg.norm(x - np.array([a, b]) * y) for a in (1, -1) for b in (1, -1)) / (2 * math.pi)
    assert float(rows(out)[0]["value"]) == pytest.approx(want, rel=1e-7)


def test_emit_profile_csv(tmp_path):
    prof = DistributionProfile(np.array([2.0, 1.0, 0.5]), np.array([0.1, 0.7, 1.5]))
    path = tmp_path / "p.csv"
    cli.emit_profile(prof, str(path))
    lines = path.read_text().splitlines()
    assert len(lines) == 4
    assert lines[0] == "gamma,measure,gamma_times_measure"
    assert [float(v) for v in lines[2].split(",")] == [1.0, 0.7, 0.7]


def test_emit_profile_json_round_trip(tmp_path):
    g = np.geomspace(3.0, 1e-3, 7)
    prof = DistributionProfile(g, 1.0 / g ** 0.7)
    path = tmp_path / "p.json"
    cli.emit_profile(prof, str(path), "json")
    back = json.loads(path.read_text())
    assert [tuple(r[k] for k in ("gamma", "measure", "gamma_times_measure")) for r in back] == prof.rows()


def test_emit_profile_errors(tmp_path):
    with pytest.raises(ContractError):
        cli.emit_profile(DistributionProfile(np.array([]), np.array([])), str(tmp_path / "e.csv"))
    prof = DistributionProfile(np.array([1.0]), np.array([1.0]))
    with pytest.raises(ContractError):
        cli.emit_profile(prof, str(tmp_path / "e.txt"), "xml")
    with pytest.raises(OSError):
        cli.emit_profile(prof, str(tmp_path / "no" / "e.csv"))


def test_console_script_is_deterministic(tmp_path):
    outs = []
    path = tmp_path / "r.json"  # the echoed config includes the output path
    for _ in range(2):
        subprocess.run([sys.executable, "-m", "bessel_harmonics.cli", "verify", "--id", "B12", "--lambda", "0.7",
                        "--ppd", "4", "--format", "json", "--out", str(path)], check=True)
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
