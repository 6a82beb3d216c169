import json
import subprocess
import sys
from pathlib import Path

import pytest

from superpainleve.cli import main

ROOT = Path(__file__).resolve().parent.parent
SEEDS = ROOT / "demos" / "seeds"


@pytest.mark.parametrize("seed,code", [("I", 0), ("II", 0), ("III", 0), ("IV", 0), ("V", 1)])
def test_analyze_exit_codes(seed, code, capsys):
    assert main(["analyze", str(SEEDS / f"{seed}.toml")]) == code


def test_analyze_osp(capsys):
    assert main(["analyze", "osp22", str(SEEDS / "osp22.toml")]) == 0


def test_analyze_json(tmp_path):
    out = tmp_path / "v.json"
    assert main(["analyze", "--seed", str(SEEDS / "II.toml"), "--format", "json", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["status"] == "PrincipalPass" and data["max_level_solved"] == 7


def test_malformed_system_exits_3(capsys):
    assert main(["analyze", str(ROOT / "demos" / "broken.eqn"), str(SEEDS / "II.toml")]) == 3
    assert "line" in capsys.readouterr().err


def test_bad_flag_exits_3():
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "--no-such-flag"])
    assert exc.value.code == 3


def test_missing_seed_file(tmp_path):
    assert main(["analyze", str(tmp_path / "absent.toml")]) == 3


def test_scan_hits(capsys):
    assert main(["scan", "--c", "3", "--alpha=-2,1,4", "--beta=-6,3,12", "--format", "json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert sorted(map(tuple, data["hits"])) == [("-2", "-6"), ("1", "3"), ("4", "12")]


def test_scan_empty_grid(capsys):
    assert main(["scan", "--alpha", "", "--beta", "1", "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["points"] == []


def test_atlas_perturb_subset(capsys):
    assert main(["atlas", "--only", "II", "--perturb", "II:alpha=1001/1000"]) == 1
    assert "MISMATCHES" in capsys.readouterr().out


def test_atlas_unknown_perturb_label():
    assert main(["atlas", "--perturb", "nope:alpha=1"]) == 3


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "superpainleve", "analyze", str(SEEDS / "V.toml")],
                       capture_output=True, text=True)
    assert p.returncode == 1
    assert "FailCompatibility" in p.stdout
