import json
import subprocess
import sys
from pathlib import Path

import pytest

from devicedr.cli import main
from devicedr.solver import load_table

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
TINY = str(CONFIGS / "tiny.json")


@pytest.fixture
def small_sweep(tmp_path):
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps({
        "gamma_grid": [0.0, 1.0],
        "runs": 2,
        "base_seed": 1,
        "output_path": str(tmp_path / "sweep.csv"),
        "learner": {"episodes": 20},
    }))
    return path


def test_solve_writes_tables(tmp_path, capsys):
    assert main(["solve", "--config", TINY, "--out", str(tmp_path)]) == 0
    q = load_table(tmp_path / "q_star.txt")
    mu = load_table(tmp_path / "policy.txt")
    assert q.shape == mu.shape == (10, 2)
    assert "V*" in capsys.readouterr().out


def test_baseline(tmp_path, capsys):
    assert main(["baseline", "--config", TINY, "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("V_base")
    assert (tmp_path / "baseline_policy.txt").exists()


def test_learn(tmp_path, small_sweep, capsys):
    log = tmp_path / "ep.csv"
    code = main(["learn", "--config", TINY, "--sweep", str(small_sweep), "--seed", "4",
                 "--out", str(tmp_path), "--episode-log", str(log)])
    assert code == 0
    assert len(log.read_text().splitlines()) == 21
    assert (tmp_path / "q_learned.txt").exists()


def test_sweep(tmp_path, small_sweep):
    out = tmp_path / "other.csv"
    assert main(["sweep", "--config", TINY, "--sweep", str(small_sweep), "--workers", "1",
                 "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 3


def test_check_theorem1(capsys):
    assert main(["check-theorem1", "--config", TINY, "--gamma-grid", "0:4:1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4 and all("PASS" in line for line in lines)


def test_check_theorem1_requires_declaration(tmp_path, tiny_dict, capsys):
    tiny_dict["theorem1_compliant"] = False
    path = tmp_path / "m.json"
    path.write_text(json.dumps(tiny_dict))
    assert main(["check-theorem1", "--config", str(path)]) == 1
    assert "refusing" in capsys.readouterr().err


def test_stationary(capsys):
    assert main(["stationary", "--config", TINY]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2


def test_invalid_instance_exit_code(tmp_path, tiny_dict, capsys):
    tiny_dict["price_chain"]["transition"][0] = [0.5, 0.4]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(tiny_dict))
    assert main(["solve", "--config", str(path)]) == 1
    assert "price_chain.transition[0]" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["solve"],
    ["solve", "--config", "/nonexistent.json"],
    ["solve", "--config", TINY, "--tol", "-1"],
    ["learn", "--config", TINY, "--seed", "-3"],
    ["check-theorem1", "--config", TINY, "--gamma-grid", "a:b"],
    ["frobnicate"],
])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "devicedr", "stationary", "--config", TINY],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.count("\n") == 2
