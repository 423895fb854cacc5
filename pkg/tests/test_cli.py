import csv
import io
import json
import subprocess
import sys

import pytest

from stochtaylor.cli import parse_grid, parse_vectors, run
from stochtaylor.errors import ConfigurationError


def body(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def header(text, key):
    for line in text.splitlines():
        if line.startswith(f"# {key}: "):
            return line.split(": ", 1)[1]
    raise KeyError(key)


def test_parse_grid_forms():
    assert parse_grid("2^-4:2^-9:6:log") == [2.0 ** -k for k in range(4, 10)]
    assert parse_grid("1e-3:1e-2:3") == pytest.approx([1e-3, 5.5e-3, 1e-2])
    assert parse_grid("0.1, 1/4") == [0.1, 0.25]
    with pytest.raises(ConfigurationError):
        parse_grid("1:2")
    with pytest.raises(ConfigurationError):
        parse_grid("0:1:4:log")
    assert parse_vectors("1,1/2,0; 0,1,2")[0][1].denominator == 2


def test_sig_line_displacement(tmp_path, capsys):
    p = tmp_path / "line.txt"
    p.write_text("0 2 1/2 -3\n")
    assert run(["sig", "--path", str(p), "--degree", "3"]) == 0
    out = capsys.readouterr().out
    rows = {r["word"]: r for r in body(out)}
    assert rows["0"]["signature"] == "2" and rows["1"]["signature"] == "1" and rows["2"]["signature"] == "-6"
    assert json.loads(header(out, "summary"))["displacement"] == ["2", "1", "-6"]
    cfg = json.loads(header(out, "config"))
    assert cfg["subcommand"] == "sig" and cfg["options"]["degree"] == 3
    assert header(out, "version").startswith("0.1.0")


def test_bch_json(capsys):
    assert run(["bch", "--vectors", "0,1,0;0,0,1", "--degree", "2", "--explicit", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    rows = {r["word"]: r for r in doc["rows"]}
    # 1/2 [X_1, X_2] is split evenly over X_(1,2) and -X_(2,1)
    assert rows["12"]["coefficient"] == "1/4" and rows["12"]["explicit"] == "1/4"
    assert rows["21"]["coefficient"] == "-1/4"
    assert set(doc) == {"config", "version", "summary", "rows"}


def test_moments_small_run(capsys):
    assert run(["moments", "--dim", "1", "--degree", "3", "--samples", "2000", "--level", "5"]) == 0
    out = capsys.readouterr().out
    assert json.loads(header(out, "summary"))["over_4_se"] == 0


def test_heat_slope(capsys):
    assert run(["heat", "--omega", "su2-epsilon", "--tgrid", "1e-3:1e-2:8", "--format", "json"]) == 0
    summary = json.loads(capsys.readouterr().out)["summary"]
    assert summary["slope"] == pytest.approx(-0.375, rel=0.01)


def test_gauss_bonnet_sphere(capsys, tmp_path):
    assert run(["gauss-bonnet", "--model", "sphere-d2"]) == 0
    row = body(capsys.readouterr().out)[0]
    assert abs(float(row["chi"]) - 2) < 1e-6
    f = tmp_path / "curv.txt"
    f.write_text("d 2\n1 2 1 2 -1\n2 1 2 1 -1\n1 1 2 2 1\n2 2 1 1 1\n")
    assert run(["gauss-bonnet", "--curvature", str(f)]) == 0
    row = body(capsys.readouterr().out)[0]
    assert row["exact_residual"] == "0"


def test_castell_small_run_is_reproducible(tmp_path):
    out = tmp_path / "c.csv"
    argv = ["castell", "--degree", "1", "--tgrid", "0.1,0.05", "--samples", "64", "--level", "3",
            "--out", str(out)]
    assert run(argv) == 0
    first = out.read_bytes()
    assert run(argv + ["--workers", "2"]) == 0
    assert out.read_bytes() == first


@pytest.mark.parametrize("argv, code", [
    (["sig", "--path", "/nonexistent/file"], 2),
    (["castell", "--degree", "5", "--samples", "8"], 2),
    (["bch", "--vectors", "1,x"], 1),
    (["heat", "--workers", "0"], 2),
    (["nosuch"], 2),
])
def test_exit_codes(argv, code, capsys):
    assert run(argv) == code
    err = capsys.readouterr().err
    assert err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "stochtaylor", "gauss-bonnet", "--model", "flat-torus-d2"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and body(res.stdout)[0]["chi"] == "0.0"
