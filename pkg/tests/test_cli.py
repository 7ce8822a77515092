from __future__ import annotations

import json
import shutil
import subprocess
import sys

import pytest

from lpstab.cli import RunConfig, main
from lpstab.errors import ParameterError
from lpstab.io import read_matrix


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def entry_count(path):
    return len(json.loads(path.read_text())["entries"])


def test_gen_examples(tmp_path, capsys):
    assert run(capsys, "gen", "random-walk", "--n", 200, "--out", tmp_path / "rw.json")[0] == 0
    assert entry_count(tmp_path / "rw.json") == 598
    assert run(capsys, "gen", "staircase", "--p", 1, "--N", 16, "--out", tmp_path / "s.json")[0] == 0
    assert entry_count(tmp_path / "s.json") == 136
    run(capsys, "gen", "dilation", "--n", 8, "--lambda", 1.2, "--out", tmp_path / "d1.json")
    run(capsys, "gen", "dilation", "--n", 8, "--lambda", 1.2, "--out", tmp_path / "d2.json")
    assert (tmp_path / "d1.json").read_bytes() == (tmp_path / "d2.json").read_bytes()


def test_gen_prints_stats(tmp_path, capsys):
    code, out, _ = run(capsys, "gen", "random-walk", "--n", 20, "--out", tmp_path / "rw.json")
    doc = json.loads(out)
    assert doc["thickness"] == 1 and doc["entries"] == 58


def test_gen_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["gen", "no-such-thing", "--out", str(tmp_path / "x.json")])
    assert exc.value.code == 2
    code, _, err = run(capsys, "gen", "polynomial-decay", "--beta", 0.5, "--n", 10, "--out", tmp_path / "p.json")
    assert code == 2 and "β" in err


def test_analyze_identity_and_walk(tmp_path, capsys):
    run(capsys, "gen", "identity", "--n", 30, "--out", tmp_path / "id.json")
    code, out, _ = run(capsys, "analyze", tmp_path / "id.json")
    doc = json.loads(out)
    assert code == 0 and doc["norms"]["schur"] == 2 and doc["structure"]["thickness"] == 0
    run(capsys, "gen", "random-walk", "--n", 200, "--out", tmp_path / "rw.json")
    doc = json.loads(run(capsys, "analyze", tmp_path / "rw.json")[1])
    assert doc["structure"]["band_width"] == 1 and doc["norms"]["schur"] == 4
    assert doc["checks"]["gram_banded"]["ok"] and doc["checks"]["disjoint_supports"]["ok"]


def test_analyze_polynomial_decay(tmp_path, capsys):
    run(capsys, "gen", "polynomial-decay", "--n", 600, "--beta", 3, "--out", tmp_path / "pd.json")
    doc = json.loads(run(capsys, "analyze", tmp_path / "pd.json")[1])
    assert abs(doc["decay"]["fitted_t"] - 2.0) < 0.3


def test_analyze_malformed_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "space": {"kind": "z_interval", "n": 2},\n  "rows": "same",\n  "entries": [\n    [0, 5, 1.0]\n  ]\n}\n')
    code, _, err = run(capsys, "analyze", bad)
    assert code == 2 and "line 5" in err


def test_lambda_identity_and_staircase(tmp_path, capsys):
    run(capsys, "gen", "identity", "--n", 20, "--out", tmp_path / "id.json")
    code, out, _ = run(capsys, "lambda", tmp_path / "id.json", "--out-dir", tmp_path / "rep")
    doc = json.loads(out)
    assert code == 0 and doc["verdict"] == "uniformly_bounded_below"
    assert all(abs(e["lambda_hat"] - 1) < 1e-12 for e in doc["estimates"])
    assert doc["fixed_constants"] == {"K_Z": 18.0, "z_lambda2_factor": 162.0, "alpha": 6.0}
    assert (tmp_path / "rep" / "lambda.json").exists() and (tmp_path / "rep" / "lambda.csv").exists()
    run(capsys, "gen", "staircase", "--p", 1, "--N", 16, "--out", tmp_path / "s.json")
    code, out, _ = run(capsys, "lambda", tmp_path / "s.json", "--csv")
    rows = {line.split(",")[0]: float(line.split(",")[1]) for line in out.splitlines()[1:]}
    assert rows["1"] == pytest.approx(1.0) and rows["inf"] <= 1 / 16 + 1e-15


def test_lambda_window_sweep(tmp_path, capsys):
    run(capsys, "gen", "random-walk", "--n", 400, "--out", tmp_path / "rw.json")
    code, out, _ = run(capsys, "lambda", tmp_path / "rw.json", "--windows", "100,200,400", "--p-grid", "1,2,inf")
    sweep = json.loads(out)["window_sweep"]
    lam2 = [w["estimates"]["2"] for w in sweep]
    assert [w["window"] for w in sweep] == [100, 200, 400]
    for a, b in zip(lam2, lam2[1:]):
        assert 3.5 < a / b < 4.5


def test_lambda_is_seed_reproducible(tmp_path, capsys):
    run(capsys, "gen", "random-thin-sparse", "--n", 60, "--r", 2, "--seed", 3, "--out", tmp_path / "t.json")
    a = run(capsys, "lambda", tmp_path / "t.json", "--seed", 7)[1]
    b = run(capsys, "lambda", tmp_path / "t.json", "--seed", 7)[1]
    assert a == b


def test_lambda_grid_rules(tmp_path, capsys):
    run(capsys, "gen", "identity", "--n", 5, "--out", tmp_path / "id.json")
    assert run(capsys, "lambda", tmp_path / "id.json", "--p-grid", "2,3")[0] == 2
    assert run(capsys, "lambda", tmp_path / "id.json", "--p-grid", "2,3", "--allow-partial-grid")[0] == 0
    assert run(capsys, "lambda", tmp_path / "id.json", "--p-grid", "0.05,1,2,inf")[0] == 2


def test_lambda_capacity_exit(tmp_path, capsys):
    run(capsys, "gen", "random-walk", "--n", 3100, "--out", tmp_path / "big.json")
    code, _, err = run(capsys, "lambda", tmp_path / "big.json", "--method", "exact_svd", "--p-grid", "2", "--allow-partial-grid")
    assert code == 3 and "smaller window" in err


def test_localize(tmp_path, capsys):
    run(capsys, "gen", "random-walk", "--n", 300, "--out", tmp_path / "rw.json")
    f = tmp_path / "f.json"
    f.write_text(json.dumps([1.0] * 300))
    code, out, _ = run(capsys, "localize", tmp_path / "rw.json", "--f", f, "--L", "4,16", "--p", "inf")
    doc = json.loads(out)
    assert code == 0 and all(r["holds"] for r in doc["results"])
    # at p = inf the tent cutoffs give exactly 1/L decay for 1 - P with f = 1
    assert doc["ratio_decay_exponent"] == pytest.approx(-1.0, abs=1e-9)


def test_invert(tmp_path, capsys):
    run(capsys, "gen", "identity", "--n", 16, "--out", tmp_path / "id.json")
    code, out, _ = run(capsys, "invert", tmp_path / "id.json", "--emit-inverse", tmp_path / "B.json")
    assert code == 0 and read_matrix(tmp_path / "B.json") == read_matrix(tmp_path / "id.json")
    run(capsys, "gen", "elliptic", "--n", 120, "--out", tmp_path / "el.json")
    doc = json.loads(run(capsys, "invert", tmp_path / "el.json", "--p-grid", "1,2,inf")[1])
    assert doc["verdict"] == "uniformly_bounded_below"
    assert all(w["diagnostics"]["ba_error"] <= 1e-8 for w in doc["windows"])
    run(capsys, "gen", "random-walk", "--n", 200, "--out", tmp_path / "rw.json")
    code, out, _ = run(capsys, "invert", tmp_path / "rw.json", "--p-grid", "1,2,inf")
    doc = json.loads(out)
    assert code == 0 and doc["verdict"] == "degenerate" and doc["trend_slope"] < -1.5


def test_verify_sequences_and_determinism(tmp_path, capsys):
    code, out, _ = run(capsys, "verify", "--suite", "sequences")
    assert code == 0 and out.count("[PASS]") == 2


def test_verify_corrupted_matrix_and_replay(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"space": {"kind": "z_interval", "n": 3}, "rows": "same", "entries": [[0, 0, 1], [0, 0, 2]]}')
    code, out, _ = run(capsys, "verify", "--matrix", bad, "--out-dir", tmp_path / "dumps")
    assert code == 1
    dumps = list((tmp_path / "dumps").glob("counterexample_*.json"))
    assert len(dumps) == 1
    doc = json.loads(dumps[0].read_text())
    assert doc["kind"] == "counterexample" and doc["failures"]
    code, out, _ = run(capsys, "verify", "--replay", dumps[0])
    assert code == 1 and json.loads(out)["passed"] is False


def test_verify_good_matrix(tmp_path, capsys):
    run(capsys, "gen", "random-thin-sparse", "--n", 50, "--r", 2, "--v", 4, "--out", tmp_path / "t.json")
    assert run(capsys, "verify", "--matrix", tmp_path / "t.json")[0] == 0


def test_run_config_validation(tmp_path):
    assert RunConfig(p_grid="1,2,inf").p_grid == [1.0, 2.0, float("inf")]
    with pytest.raises(ParameterError):
        RunConfig(p_grid=[2, 3])
    with pytest.raises(ParameterError):
        RunConfig(budget=(0, 5))
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"p_grid": ["1", "2", "inf"], "seed": 4, "weight": {"subexp": [1, 0.5]}}))

    class Args:
        config = str(cfg)
        p_grid = None
        seed = None
        allow_partial_grid = False

    c = RunConfig.from_args(Args)
    assert c.seed == 4 and c.weight.family == "subexp"


@pytest.mark.skipif(shutil.which("lpstab") is None, reason="console script not installed")
def test_console_script(tmp_path):
    out = subprocess.run(
        ["lpstab", "gen", "staircase", "--p", "1", "--N", "4", "--out", str(tmp_path / "s.json")],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0 and entry_count(tmp_path / "s.json") == 10


def test_module_entry(tmp_path):
    out = subprocess.run([sys.executable, "-m", "lpstab.cli", "verify", "--suite", "zoo"], capture_output=True, text=True)
    assert out.returncode == 0 and "[PASS]" in out.stdout
