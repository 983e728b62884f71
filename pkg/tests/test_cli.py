import json

import numpy as np
import pytest

from nonrev.cli import main
from nonrev.linalg import read_matrix


@pytest.fixture
def mfile(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("2\n1 0\n0 0.1\n")
    return p


def run(capsys, *args):
    code = main(list(map(str, args)))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_basis(tmp_path, mfile, capsys):
    code, out, _ = run(capsys, "--out", tmp_path, "basis", "--matrix", mfile)
    assert code == 0
    assert json.loads(out)["target"] == pytest.approx(0.55)
    psi = read_matrix(tmp_path / "basis.txt")
    np.testing.assert_allclose(np.abs(psi), 2**-0.5, atol=1e-14)
    assert (tmp_path / "balance.csv").read_text().startswith("index,rayleigh,deviation")


def test_optimize(tmp_path, mfile, capsys):
    code, out, _ = run(capsys, "--out", tmp_path, "optimize", "--matrix", mfile)
    assert code == 0
    rep = json.loads(out)
    assert rep["pass"] and rep["spectrum"]["minRe"] == pytest.approx(0.55)
    for name in ("J.txt", "Jtilde.txt", "Q.txt", "BJ.txt", "report.json"):
        assert (tmp_path / name).exists()


def test_optimize_options(tmp_path, mfile, capsys):
    (tmp_path / "l.csv").write_text("1,5\n")
    code, out, _ = run(capsys, "--out", tmp_path, "optimize", "--matrix", mfile,
                       "--ladder", f"csv:{tmp_path / 'l.csv'}", "--flip-sign")
    assert code == 0 and json.loads(out)["constants"]["kappaQ"] == pytest.approx(5.0)
    code, out, _ = run(capsys, "--out", tmp_path, "optimize", "--matrix", mfile,
                       "--construction", "triangular")
    assert code == 0 and "constants" not in json.loads(out)
    assert run(capsys, "optimize", "--matrix", mfile, "--ladder", "bogus")[0] == 1


def test_decay(tmp_path, mfile, capsys):
    code, _, _ = run(capsys, "--out", tmp_path, "decay", "--matrix", mfile, "--optimal",
                     "--steps", 20)
    assert code == 0
    lines = (tmp_path / "decay.csv").read_text().splitlines()
    assert lines[0] == "t,norm_reversible,norm_optimal,bound_optimal"
    assert len(lines) == 21
    code, _, _ = run(capsys, "--format", "json", "--out", tmp_path, "decay", "--matrix", mfile)
    assert code == 0
    assert set(json.loads((tmp_path / "decay.json").read_text())) == {"t", "norm_reversible"}


def test_twodim(capsys):
    code, out, _ = run(capsys, "twodim", "--lambda", 0.1, "--a", 2.0)
    assert code == 0 and json.loads(out)["aCritSquared"] == pytest.approx(2.025)


def test_gaussflow(tmp_path, mfile, capsys):
    (tmp_path / "x0.txt").write_text("1 1\n")
    (tmp_path / "sig.txt").write_text("2\n0.5 0\n0 1\n")
    code, _, err = run(capsys, "--out", tmp_path, "gaussflow", "--matrix", mfile,
                       "--x0", tmp_path / "x0.txt", "--sigma0", tmp_path / "sig.txt",
                       "--tmax", 10, "--steps", 6)
    assert code == 0 and "t0 =" in err
    lines = (tmp_path / "gaussflow.csv").read_text().splitlines()
    assert lines[0] == "t,mean_norm,cov_dev_norm,l2_distance,bound"
    assert lines[1].endswith(",nan")
    (tmp_path / "big.txt").write_text("2\n30 0\n0 30\n")
    code, _, _ = run(capsys, "--out", tmp_path, "gaussflow", "--matrix", mfile,
                     "--x0", tmp_path / "x0.txt", "--sigma0", tmp_path / "big.txt",
                     "--tmax", 1, "--steps", 2)
    assert code == 0
    assert ",inf," in (tmp_path / "gaussflow.csv").read_text().splitlines()[1]


def test_simulate(tmp_path, capsys):
    cfg = {"dim": 2, "potential": "double_well", "delta": 10, "beta": 10, "steps": 200,
           "nPaths": 500, "recordEvery": 50}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    code, _, _ = run(capsys, "--out", tmp_path, "--seed", 4, "simulate", "--config",
                     tmp_path / "c.json")
    assert code == 0
    first = (tmp_path / "trace.csv").read_bytes()
    assert first.splitlines()[0] == b"t,mean_obs,stderr"
    assert len(first.splitlines()) == 6
    run(capsys, "--out", tmp_path, "--seed", 4, "simulate", "--config", tmp_path / "c.json")
    assert (tmp_path / "trace.csv").read_bytes() == first
    (tmp_path / "bad.json").write_text(json.dumps({"dim": 2, "potential": "nope"}))
    assert run(capsys, "simulate", "--config", tmp_path / "bad.json")[0] == 1
    (tmp_path / "bad2.json").write_text("{")
    assert run(capsys, "simulate", "--config", tmp_path / "bad2.json")[0] == 1


def test_simulate_blowup_exit_code(tmp_path, capsys):
    cfg = {"dim": 1, "drift": "linear", "B": [[-100.0]], "dt": 0.1, "steps": 1000, "nPaths": 4}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    with pytest.warns(RuntimeWarning):
        code, _, err = run(capsys, "simulate", "--config", tmp_path / "c.json")
    assert code == 2 and "path" in err


def test_hermite_check(mfile, capsys):
    code, out, _ = run(capsys, "hermite-check", "--matrix", mfile, "--degree", 4)
    rep = json.loads(out)
    assert code == 0 and rep["pass"]
    assert len(rep["perBlock"]) == 5


def test_preset(tmp_path, capsys):
    code, out, _ = run(capsys, "--out", tmp_path, "preset", "fig3-3d", "--set", "steps=20")
    assert code == 0
    assert json.loads(out)["parameters"]["steps"] == 20
    assert (tmp_path / "fig3-3d" / "manifest.json").exists()
    assert run(capsys, "preset", "fig3-3d", "--set", "oops")[0] == 1


def test_exit_codes(tmp_path, capsys):
    (tmp_path / "asym.txt").write_text("2\n1 2\n3 4\n")
    assert run(capsys, "optimize", "--matrix", tmp_path / "asym.txt")[0] == 1
    assert run(capsys, "optimize", "--matrix", tmp_path / "missing.txt")[0] == 3
    assert run(capsys, "bogus")[0] == 1
    assert run(capsys, "twodim", "--lambda", -1, "--a", 1)[0] == 1
    assert run(capsys, "--help")[0] == 0
