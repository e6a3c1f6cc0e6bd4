import json
import subprocess
import sys

import pytest

from fakepath.cli import main


def test_sweep_to_file(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--out", str(out)]) == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0].startswith("snr_db,") and len(lines) == 5


def test_json_and_seed_override(tmp_path):
    out = tmp_path / "s.json"
    assert main(["sweep", "--seed", "3", "--format", "json", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert all(r["seed"] == 3 for r in data)


def test_figure_to_stdout(capsys):
    assert main(["figure", "bounds"]) == 0
    assert capsys.readouterr().out.startswith("mu,")


def test_normalize_power_flag_changes_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--out", str(a)]) == 0
    assert main(["sweep", "--normalize-power", "--out", str(b)]) == 0
    assert a.read_text() != b.read_text()


def test_validate(tmp_path, capsys):
    assert main(["validate", "--quiet"]) == 0
    assert capsys.readouterr().out.strip() == "ok"
    bad = tmp_path / "bad.yaml"
    bad.write_text("system: {B: -15e6}\n")
    assert main(["validate", "--scenario", str(bad)]) == 2
    assert "invalid scenario" in capsys.readouterr().err


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("system: {N: 16, unknown: 1}\n")
    assert main(["sweep", "--scenario", str(bad)]) == 2
    assert main(["sweep", "--scenario", str(tmp_path / "nope.yaml")]) == 2
    # runtime failure: output directory does not exist
    assert main(["sweep", "--out", str(tmp_path / "no" / "dir.csv")]) == 1
    with pytest.raises(SystemExit) as info:
        main(["figure", "fig99"])
    assert info.value.code == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "fakepath", "validate", "--quiet"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "ok"
