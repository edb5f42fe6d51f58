import json
import subprocess
import sys

import numpy as np
import pytest

from noisybs.cli import run


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_probability_identity(capsys):
    assert run(["probability", "--N", "3", "--x", "1", "--unitary", "identity"]) == 0
    doc = _json(capsys)
    assert doc["result"]["probability"] == 1.0
    assert doc["version"] and "wall_time" in doc and doc["config"]["N"] == 3


def test_probability_csv_has_header(capsys):
    assert run(["probability", "--N", "2", "--x", "1/2", "--unitary", "identity", "--format", "csv"]) == 0
    out = capsys.readouterr().out
    assert "# config:" in out and "# version:" in out
    ports, value = out.strip().splitlines()[-1].split(",")
    assert ports == "0-1" and float(value) == pytest.approx(1.0, abs=1e-12)


def test_routes_cli(capsys):
    base = ["--N", "3", "--x", "0.3", "--ensemble", "haar", "--M", "6", "--seed", "4"]
    values = []
    for route in ["model", "bruteforce", "expansion", "convex", "rearranged"]:
        assert run(["probability", "--R", "1", "--route", route, *base]) == 0
        values.append(_json(capsys)["result"]["probability"])
    assert max(values) - min(values) <= 1e-9 * abs(values[0])


def test_expansion_check(capsys):
    assert run(["expansion-check", "--N", "4", "--x", "1/2", "--R", "2", "--ensemble", "ginibre",
                "--M", "7", "--seed", "3"]) == 0
    assert _json(capsys)["result"]["agree"] is True


def test_threshold(capsys):
    assert run(["threshold", "--N", "20", "--K", "6", "--R", "3"]) == 0
    res = _json(capsys)["result"]
    assert res["x_star_float"] == pytest.approx(1 / 18, rel=1e-9)
    assert res["feasible_at_star"] is True


def test_positivity_exact(capsys):
    assert run(["positivity", "--N", "2", "--model", "cutoff", "--R", "1", "--x", "1", "--gram"]) == 0
    res = _json(capsys)["result"]
    assert res["b"] == ["0", "1", "-1"]
    assert res["sufficient_pd"] is False and res["exact"] is True


def test_positivity_needs_parameters(capsys):
    assert run(["positivity", "--N", "3", "--model", "cutoff", "--x", "1"]) == 2


def test_characters(capsys):
    assert run(["characters", "--N", "2", "--x", "1/3"]) == 0
    assert _json(capsys)["result"]["q"] == {"1+1": "4/9", "2": "5/9"}
    assert run(["characters", "--N", "2", "--trace-n", "0"]) == 0
    assert _json(capsys)["result"]["integral"] is False


def test_negativity_csv_and_summary(tmp_path, capsys):
    out = tmp_path / "neg.csv"
    argv = ["negativity", "--n", "5", "--R", "3", "--trials", "100", "--seed", "42", "--format", "csv", "-o", str(out)]
    assert run(argv) == 0
    text = out.read_text()
    assert "bin_left,bin_right,count" in text and "# seed: 42" in text
    summary = json.loads(out.with_suffix(".summary.json").read_text())
    assert summary["seed"] == 42 and "fraction_negative" in summary["summary"]


def test_experiment_reproducible(capsys):
    argv = ["moments", "--N", "2", "--M", "10", "--trials", "50", "--seed", "9"]
    assert run(argv) == 0
    a = _json(capsys)["result"]
    assert run(argv) == 0
    b = _json(capsys)["result"]
    a.pop("wall_time"), b.pop("wall_time")
    assert a == b


def test_seed_drawn_and_printed(capsys):
    assert run(["tvd", "--N", "2", "--M", "4", "--x", "1/2", "--R", "1", "--trials", "25"]) == 0
    captured = capsys.readouterr()
    seed = int(captured.err.split("seed:")[1].split()[0])
    assert json.loads(captured.out)["seed"] == seed


def test_svg_output(tmp_path):
    out = tmp_path / "h.svg"
    assert run(["tvd", "--N", "2", "--M", "4", "--x", "1/2", "--R", "1", "--trials", "25", "--seed", "1",
                "--format", "svg", "-o", str(out)]) == 0
    text = out.read_text()
    assert "<svg" in text and "<rect" in text and "# seed: 1" in text


def test_sample_and_table(capsys):
    assert run(["sample", "--N", "2", "--shots", "5", "--unitary", "identity", "--M", "3", "--seed", "1"]) == 0
    assert _json(capsys)["result"]["samples"] == [[0, 1]] * 5
    assert run(["sample", "--N", "2", "--shots", "5", "--ensemble", "haar", "--M", "4", "--seed", "1",
                "--mode", "distinguishable", "--format", "csv"]) == 0
    assert "port_0,port_1" in capsys.readouterr().out
    assert run(["table", "--N", "2", "--x", "1/2", "--ensemble", "haar", "--M", "4", "--seed", "2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["configs"]) == 6 and doc["seed"] == 2


def test_unitary_file(tmp_path, capsys):
    u = np.array([[0, 1j], [1, 0]])
    path = tmp_path / "u.json"
    path.write_text(json.dumps([[[z.real, z.imag] for z in row] for row in u]))
    assert run(["probability", "--N", "2", "--x", "1", "--unitary-file", str(path)]) == 0
    assert _json(capsys)["result"]["probability"] == pytest.approx(1.0)
    path.write_text("[[1, 2], [3, 4]]")
    assert run(["probability", "--N", "2", "--x", "1", "--unitary-file", str(path)]) == 2


def test_exit_codes(capsys):
    assert run(["nonsense"]) == 2
    assert "usage" in capsys.readouterr().err
    assert run(["probability", "--N", "3", "--x", "1", "--bogus"]) == 2
    assert run(["probability", "--N", "3", "--x", "abc"]) == 2
    assert run(["probability", "--N", "3", "--x", "3/2", "--unitary", "identity"]) == 2
    assert run(["probability", "--N", "14", "--x", "1", "--unitary", "identity"]) == 3
    assert run(["threshold", "--N", "3", "--K", "5", "--R", "1"]) == 2


def test_invariant_exit_code(monkeypatch, capsys):
    import noisybs.cli as cli
    from noisybs.errors import ImaginaryResidueError

    def broken(*args, **kwargs):
        raise ImaginaryResidueError("residue too large", 1e-3)

    monkeypatch.setattr(cli, "probability_from_model", broken)
    assert run(["probability", "--N", "2", "--x", "1", "--unitary", "identity"]) == 4


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "noisybs", "probability", "--N", "1", "--x", "1", "--unitary", "identity"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["probability"] == 1.0
