import json
import subprocess
import sys

import pytest

from conftest import example_path
from coopsec.cli import EXIT_GUARD, EXIT_INVALID, EXIT_MISSING, EXIT_OK, main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def test_solve(capsys):
    code, out, _ = run(capsys, "solve", example_path("optimum_not_nash"))
    assert code == EXIT_OK
    assert out["command"] == "solve" and len(out["input_hash"]) == 64 and out["version"]
    assert out["independent"] == {"secured": [1], "cost": 5.0}
    assert out["optimal"] == {"secured": [1, 2], "cost": 4.0}
    assert out["optimal_is_nash"] is False


def test_coalition_cost_both_methods(capsys):
    path = example_path("delta_example")
    _, fast, _ = run(capsys, "coalition-cost", path, "--coalition", "1,3,5")
    _, slow, _ = run(capsys, "coalition-cost", path, "--coalition", "1,3,5", "--brute-force")
    assert fast["cost"] == slow["cost"]


def test_shapley_methods(capsys):
    code, out, _ = run(capsys, "shapley", example_path("two_player"), "--method", "closed")
    assert code == EXIT_OK and out["shares"] == [5.0, 5.0]
    code, out, err = run(capsys, "shapley", example_path("delta_example"), "--method", "closed")
    assert code == EXIT_MISSING and out["exists"] is False and "closed form" in err
    code, out, _ = run(capsys, "shapley", example_path("two_player"), "--method", "mc",
                       "--samples", "20", "--seed", "1")
    assert code == EXIT_OK and out["total"] == pytest.approx(10.0)


def test_core_check_and_extreme(capsys):
    path = example_path("two_player")
    _, out, _ = run(capsys, "core-check", path, "--allocation", "5,5")
    assert out["in_core"] is True
    _, out, _ = run(capsys, "core-check", path, "--allocation", "20,-10")
    assert out["in_core"] is False and out["violated_coalition"] == [1]
    _, out, _ = run(capsys, "extreme-core", path, "--order", "2,1")
    assert out["shares"] == [-5.0, 15.0]


def test_agreeable_stalls(capsys):
    code, out, err = run(capsys, "agreeable", example_path("delta_example_variant"))
    assert code == EXIT_MISSING
    assert out["reason"] == "family stalled at {1,5}"
    assert "stalled" in err


def test_delta_agreeable(capsys):
    code, out, _ = run(capsys, "delta-agreeable", example_path("delta_example_variant"),
                       "--delta", "2", "--list-permutations")
    assert code == EXIT_OK
    assert out["shares"] == [10.0, 6.75, 11.5, 6.75, 15.0]
    assert out["permutation_count"] == 8 and len(out["permutations"]) == 8
    code, _, _ = run(capsys, "delta-agreeable", example_path("delta_example_variant"),
                     "--delta", "2", "--list-permutations", "--cap", "3")
    assert code == EXIT_GUARD


def test_public_equilibrium_and_stability(capsys):
    path = example_path("unstable_hub")
    _, out, _ = run(capsys, "public-eq", path, "--partition", "1,2|3")
    assert out["secured"] == [1, 2, 3] and out["audit_passed"] is True
    _, out, _ = run(capsys, "partition-cost", path, "--coalition", "3", "--partition", "1,2|3")
    assert out["cost"] == pytest.approx(10.0)
    _, out, _ = run(capsys, "stability-check", path)
    assert out["stable"] is False
    assert [b["bound"] for b in out["blocking"]] == [0.0, 10.0, 10.0]


def test_partial_agreeable(capsys):
    code, out, _ = run(capsys, "partial-agreeable", example_path("delta_example"), "--public", "1,2")
    assert code == EXIT_OK and out["total"] == pytest.approx(50.0)


def test_homogeneous_commands(capsys):
    path = example_path("two_player")
    _, out, _ = run(capsys, "predict-homogeneous", path)
    assert out["verdict"] == "exists"
    _, out, _ = run(capsys, "kcore", path, "--k", "1")
    assert out["core"] == [1, 2]
    code, _, err = run(capsys, "predict-homogeneous", example_path("delta_example"))
    assert code == EXIT_INVALID and err


def test_reduce_round_trip(capsys):
    _, out, _ = run(capsys, "reduce", example_path("two_player"))
    assert out["removed"] == [] and len(out["network"]["nodes"]) == 2


@pytest.mark.parametrize("argv", [
    ["solve", "does-not-exist.json"],
    ["coalition-cost", "{path}", "--coalition", "9"],
    ["core-check", "{path}", "--allocation", "1"],
    ["public-eq", "{path}", "--partition", "1|1"],
    ["simulate", "--topology", "ring(3)"],
    ["bogus-command"],
])
def test_invalid_input(capsys, argv):
    argv = [a.format(path=example_path("two_player")) for a in argv]
    code, _, err = run(capsys, *argv)
    assert code == EXIT_INVALID
    assert err


def test_not_reduced(capsys, tmp_path):
    doc = {"nodes": [{"id": 1, "theta": 10, "L": 0}, {"id": 2, "theta": 1, "L": 50}],
           "arcs": [{"from": 1, "to": 2, "xi": 4}]}
    path = tmp_path / "net.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(capsys, "agreeable", path)
    assert code == EXIT_INVALID and "reduce" in err
    code, out, _ = run(capsys, "agreeable", path, "--reduce")
    assert code == EXIT_OK and out["shares"] == [0.0, 5.0]


def test_out_flag(capsys, tmp_path):
    target = tmp_path / "result.json"
    code, out, _ = run(capsys, "solve", example_path("two_player"), "--out", target)
    assert code == EXIT_OK and out is None
    assert json.loads(target.read_text())["cost"] == 10.0


def test_simulate_csv(capsys, tmp_path):
    csv_path = tmp_path / "runs.csv"
    code, out, _ = run(capsys, "simulate", "--topology", "star(4)", "--runs", "5", "--seed", "2",
                       "--csv", csv_path)
    assert code == EXIT_OK and out["runs"] == 5
    assert len(csv_path.read_text().splitlines()) == 6
    assert csv_path.with_suffix(".json").exists()
    _, again, _ = run(capsys, "simulate", "--topology", "star(4)", "--runs", "5", "--seed", "2")
    assert again["input_hash"] == out["input_hash"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "coopsec", "solve", example_path("two_player")],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["cost"] == 10.0
