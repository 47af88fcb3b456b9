import json
import subprocess
import sys

import numpy as np
import pytest

from qop.cli import main, sweep_rows
from qop.densmat import make_density_from_prob, matrix_to_json, random_qubit, probability
from qop.dkbasis import DkPolynomial, eval_dk
from qop.krausfab import build_polynomial_operation
from qop.swapprox import BUILTINS


def run(*argv):
    return main([str(a) for a in argv])


def write_states(path, states):
    path.write_text(json.dumps({"states": [matrix_to_json(s.mat) for s in states]}))
    return path


@pytest.fixture
def halves(tmp_path):
    half = make_density_from_prob(0.5)
    return write_states(tmp_path / "halves.json", [half, half])


@pytest.mark.parametrize("name", sorted(BUILTINS))
@pytest.mark.parametrize("eps", [0.1, 0.05])
def test_synth_verify_round_trip(tmp_path, name, eps):
    op, rep = tmp_path / "op.json", tmp_path / "rep.json"
    assert run("synth", "--fn", name, "--shrink", "--eps", eps, "--out", op, "--report", rep) == 0
    report = json.loads(rep.read_text())
    assert report["sup_error"] <= eps and report["M"] >= 1
    assert run("verify", "--op", op) == 0


def test_synth_is_deterministic(tmp_path):
    outs = []
    for i in range(2):
        op, rep = tmp_path / f"op{i}.json", tmp_path / f"rep{i}.json"
        assert run("synth", "--fn", "luka_sum", "--eps", "0.1", "--out", op, "--report", rep) == 0
        outs.append((op.read_bytes(), rep.read_bytes()))
    assert outs[0] == outs[1]
    assert b"\r\n" not in outs[0][0]


def test_synth_unknown_builtin(tmp_path, capsys):
    assert run("synth", "--fn", "nosuch", "--eps", "0.1", "--out", tmp_path / "x.json") == 1
    assert "luka_sum" in capsys.readouterr().err


def test_synth_direct_capability_limit(tmp_path):
    assert run("synth", "--fn", "luka_sum", "--mode", "direct", "--eps", "0.05", "--out", tmp_path / "x.json") == 2
    assert not (tmp_path / "x.json").exists()


def test_synth_export_cap(tmp_path, capsys):
    # certified only at k = 8, far above the export cap
    assert run("synth", "--fn", "luka_sum", "--mode", "direct", "--eps", "0.1", "--out", tmp_path / "x.json") == 2
    assert "export limit" in capsys.readouterr().err


def test_synth_from_samples(tmp_path):
    samples = tmp_path / "and.json"
    samples.write_text(json.dumps({"n": 2, "k_grid": 1, "values": [[0, 0], [0, 1]]}))
    op, rep = tmp_path / "op.json", tmp_path / "rep.json"
    assert run("synth", "--samples", samples, "--mode", "direct", "--eps", "0.01", "--out", op, "--report", rep) == 0
    report = json.loads(rep.read_text())
    assert report["k"] == 1 and report["name"] == "and"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 2, "values": [1, 2]}))
    assert run("synth", "--samples", bad, "--eps", "0.1", "--out", op) == 1
    bad.write_text("{not json")
    assert run("synth", "--samples", bad, "--eps", "0.1", "--out", op) == 1


def test_verify_detects_perturbed_scale(tmp_path, capsys):
    op = tmp_path / "op.json"
    assert run("synth", "--fn", "product", "--eps", "0.1", "--out", op) == 0
    obj = json.loads(op.read_text())
    obj["rank_one"][0]["scale"] *= 1 + 1e-3
    op.write_text(json.dumps(obj))
    assert run("verify", "--op", op) == 3
    assert capsys.readouterr().out.strip().endswith("FAIL")


def test_verify_choi(tmp_path, capsys):
    op = tmp_path / "iand.json"
    assert run("gates", "--name", "iand", "--out", op) == 0
    assert run("verify", "--op", op, "--choi") == 0
    assert "choi_min_eigenvalue" in capsys.readouterr().out


def test_verify_choi_too_large(tmp_path):
    p = DkPolynomial(1, 5, np.linspace(0, 1, 32))
    op = tmp_path / "big.json"
    op.write_text(build_polynomial_operation(p).dumps())
    assert run("verify", "--op", op) == 0
    assert run("verify", "--op", op, "--choi") == 2


def test_gates_export(tmp_path, capsys):
    for name in ("not", "iand", "luka"):
        path = tmp_path / f"{name}.json"
        assert run("gates", "--name", name, "--out", path) == 0
        assert run("verify", "--op", path, "--choi") == 0
    assert "M=1.1666666666666667" in capsys.readouterr().out


def test_apply_outputs(tmp_path, capsys, halves):
    ops = {}
    for name in ("not", "iand", "luka"):
        ops[name] = tmp_path / f"{name}.json"
        run("gates", "--name", name, "--out", ops[name])
    capsys.readouterr()
    assert run("apply", "--op", ops["iand"], "--state", halves) == 0
    assert capsys.readouterr().out.strip() == "0.25"
    assert run("apply", "--op", ops["luka"], "--state", halves, "--copies", 2) == 0
    assert float(capsys.readouterr().out) == pytest.approx(11 / 14, abs=1e-14)
    single = tmp_path / "q.json"
    single.write_text(json.dumps(matrix_to_json(make_density_from_prob(0.3).mat)))
    assert run("apply", "--op", ops["not"], "--state", single) == 0
    assert float(capsys.readouterr().out) == pytest.approx(0.7, abs=1e-15)


def test_apply_dimension_mismatch(tmp_path, halves):
    op = tmp_path / "luka.json"
    run("gates", "--name", "luka", "--out", op)
    assert run("apply", "--op", op, "--state", halves) == 1
    assert run("apply", "--op", op, "--state", halves, "--copies", 0) == 1


def test_apply_matches_stored_polynomial(tmp_path, capsys, rng):
    op = tmp_path / "op.json"
    assert run("synth", "--fn", "min", "--shrink", "--eps", "0.1", "--out", op) == 0
    obj = json.loads(op.read_text())
    poly = DkPolynomial.from_json(obj["polynomial"])
    for _ in range(5):
        states = [random_qubit(rng), random_qubit(rng)]
        path = write_states(tmp_path / "s.json", states)
        out = tmp_path / "out.json"
        capsys.readouterr()
        assert run("apply", "--op", op, "--state", path, "--copies", poly.k, "--out", out) == 0
        p = float(capsys.readouterr().out)
        assert p == pytest.approx(eval_dk(poly, [probability(s) for s in states]), abs=1e-10)
        assert json.loads(out.read_text())["probability"] == pytest.approx(p, abs=1e-14)


def test_sweep_golden(tmp_path, capsys):
    out = tmp_path / "diff.csv"
    assert run("sweep", "--what", "luka", "--res", 3, "--out", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x,y,value" and len(lines) == 10
    assert lines[1] == "0,0,0" and lines[5] == "0.5,0.5,1" and lines[-1] == "1,1,1"
    assert run("sweep", "--what", "luka_poly", "--res", 3, "--out", out) == 0
    assert float(out.read_text().splitlines()[5].split(",")[2]) == pytest.approx(11 / 12)
    capsys.readouterr()
    assert run("sweep", "--what", "diff", "--res", 1001, "--out", out) == 0
    text = capsys.readouterr().out
    first, second = text.splitlines()
    assert float(first.split()[1]) == pytest.approx(1 / 12, abs=1e-12)
    assert "1001 lattice points" in first
    assert float(second.split()[1]) == pytest.approx(-1 / 15, abs=1e-4)


def test_sweep_rows_order():
    xs, ys, _ = sweep_rows("luka", 2)
    assert list(zip(xs, ys)) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as info:
        run("frobnicate")
    assert info.value.code == 1
    assert run("sweep", "--what", "luka", "--res", 1) == 1
    assert run("apply", "--op", tmp_path / "missing.json", "--state", tmp_path / "missing.json") == 1


def test_console_entry_point(tmp_path):
    out = tmp_path / "not.json"
    res = subprocess.run([sys.executable, "-m", "qop", "gates", "--name", "not", "--out", str(out)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(out.read_text())["name"] == "NOT"
