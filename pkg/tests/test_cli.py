import json
import os

import numpy as np
import pytest

from supround.cli import main
from supround.coupling import Coupling, save_coupling
from supround.spaces import save_space
from supround.synthetic import unit_cube


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def demo(data_dir):
    def path(name):
        return os.path.join(data_dir, name)

    base = ["--space", path("demo_space.json"), "--factors", "2"]
    return path, base


def test_correct_exact_targets_fast_path(demo, capsys, tmp_path):
    path, base = demo
    out_file = tmp_path / "out.json"
    code, out, _ = run(["correct", *base, "--coupling", path("demo_coupling.json"),
                        "--target", path("demo_exact_0.csv"), "--target", path("demo_exact_1.csv"),
                        "--out", str(out_file)], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["fast_path"] and rep["epsilon"] == 0.0
    a = json.loads(out_file.read_text())["values"]
    b = json.loads(open(path("demo_coupling.json")).read())["values"]
    assert a == b


def test_correct_then_verify(demo, capsys, tmp_path):
    path, base = demo
    out_file = tmp_path / "out.json"
    report = tmp_path / "rep.json"
    targets = ["--target", path("demo_target_0.csv"), "--target", path("demo_target_1.csv")]
    code, _, _ = run(["--report", str(report), "correct", *base,
                      "--coupling", path("demo_coupling.json"), *targets, "--out", str(out_file)], capsys)
    rep = json.loads(report.read_text())
    assert code == 0 and rep["max_residual"] <= 1e-10
    code, out, _ = run(["verify", *base, "--a", path("demo_coupling.json"), "--b", str(out_file),
                        *targets, "--eps", str(rep["epsilon"]), "--K", str(rep["K"])], capsys)
    assert code == 0 and json.loads(out)["status"] == "pass"


def test_correct_gate_failure(demo, capsys):
    path, base = demo
    code, out, err = run(["correct", *base, "--coupling", path("demo_coupling.json"),
                          "--target", path("demo_far_0.csv"), "--target", path("demo_far_1.csv")], capsys)
    rep = json.loads(out)
    assert code == 3
    assert rep["coordinate"] in (0, 1) and "coordinate" in err


def test_correct_perturb_is_seeded(demo, capsys):
    path, base = demo
    args = ["correct", *base, "--coupling", path("demo_coupling.json"), "--perturb", "0.01"]
    first = run(["--seed", "3", *args], capsys)[1]
    second = run(["--seed", "3", *args], capsys)[1]
    third = run(["--seed", "4", *args], capsys)[1]
    assert first == second != third


def test_correct_csv_report(demo, capsys):
    path, base = demo
    code, out, _ = run(["--format", "csv", "correct", *base, "--coupling", path("demo_coupling.json"),
                        "--target", path("demo_target_0.csv"), "--target", path("demo_target_1.csv")], capsys)
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "stage,coordinate,epsilon,sigma,residual_before,deviation"
    assert len(lines) == 3


def test_sigma_lipschitz_interval_closed_form(tmp_path, capsys):
    X = unit_cube(11, 2)
    save_space(X.factors[0], tmp_path / "x.json")
    save_coupling(Coupling(X, np.ones(X.shape)), tmp_path / "p.json")
    eps = [0.05, 0.2, 0.7]
    code, out, _ = run(["--format", "csv", "sigma", "--space", str(tmp_path / "x.json"), "--factors", "2",
                        "--coupling", str(tmp_path / "p.json"), "--modulus", '{"kind": "lipschitz", "L": 2}',
                        "--radial", "interval", "--eps", *map(str, eps)], capsys)
    assert code == 0
    rows = [r.split(",") for r in out.strip().splitlines()[1:]]
    assert len(rows) == 6
    for r in rows:
        e, s = float(r[1]), float(r[2])
        assert s == pytest.approx(e**2 / 8, rel=1e-6)


def test_sigma_rejects_zero_eps(demo, capsys):
    path, base = demo
    code, _, err = run(["sigma", *base, "--coupling", path("demo_coupling.json"), "--eps", "0"], capsys)
    assert code == 2 and "positive" in err


def test_sigma_empirical_below_lipschitz(demo, capsys):
    # the conservative step envelope keeps the empirical threshold below a valid Lipschitz one
    path, base = demo
    eps = ["0.05", "0.2", "0.5", "1.0"]
    common = ["sigma", *base, "--coupling", path("demo_coupling.json"), "--eps", *eps]
    emp = json.loads(run(common, capsys)[1])["rows"]
    lip = json.loads(run([*common, "--modulus", '{"kind": "lipschitz", "L": 7.9}'], capsys)[1])["rows"]
    for a, b in zip(emp, lip):
        assert a["sigma"] <= b["sigma"]


def test_kappa(demo, capsys):
    path, base = demo
    code, out, _ = run(["kappa", *base, "--coupling", path("demo_coupling.json")], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["K"] == 10.0 and len(rep["rows"]) == 2


def test_verify_identity(demo, capsys):
    path, base = demo
    code, out, _ = run(["verify", *base, "--a", path("demo_coupling.json"), "--b", path("demo_coupling.json"),
                        "--target", path("demo_exact_0.csv"), "--target", path("demo_exact_1.csv")], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["sup_distance"] == 0.0
    assert max(rep["residuals"]) <= 1e-15


def test_verify_names_negative_cell(demo, capsys, tmp_path):
    path, base = demo
    data = json.loads(open(path("demo_coupling.json")).read())
    data["values"][16 * 2 + 5] = -0.25
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    code, out, err = run(["verify", *base, "--a", path("demo_coupling.json"), "--b", str(bad),
                          "--target", path("demo_exact_0.csv"), "--target", path("demo_exact_1.csv")], capsys)
    assert code == 4
    assert "[2, 5]" in err and json.loads(out)["status"] == "fail"


def test_verify_shape_mismatch(demo, capsys, tmp_path):
    path, base = demo
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"shape": [4, 4], "values": [0.0] * 16}))
    code, _, _ = run(["verify", *base, "--a", path("demo_coupling.json"), "--b", str(bad),
                      "--target", path("demo_exact_0.csv"), "--target", path("demo_exact_1.csv")], capsys)
    assert code == 2


def test_example_C_ratio(capsys, tmp_path):
    code, out, _ = run(["example", "C", "--eps", "0.1", "--L", "1", "--out-dir", str(tmp_path)], capsys)
    cert = json.loads(out)
    assert code == 0 and cert["gap_over_sigma"] == pytest.approx(4.0, abs=1e-9)
    assert {"coupling.json", "marginal.csv", "certificate.json", "space_0.json"} <= set(os.listdir(tmp_path))


def test_example_B_forced_one(capsys):
    code, out, _ = run(["example", "B", "--n", "5"], capsys)
    assert code == 0 and json.loads(out)["forced_deviation"] == 1.0


def test_example_A_coarse_grid(capsys):
    code, _, err = run(["example", "A", "--n", "3", "--resolution", "4"], capsys)
    assert code == 2 and "minimal resolution 6" in err


def test_pipeline(demo, capsys, tmp_path):
    path, base = demo
    code, out, _ = run(["pipeline", *base, "--cost", path("demo_cost.json"),
                        "--target", path("demo_uniform.csv"), "--target", path("demo_uniform.csv"),
                        "--h", "0.05", "--tol", "1e-4", "--out-dir", str(tmp_path)], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["max_residual"] <= 1e-10
    assert rep["solver_deviation"] <= rep["certified_bound"]
    assert {"solver.json", "rounded.json"} <= set(os.listdir(tmp_path))
    code, out, _ = run(["pipeline", *base, "--cost", path("demo_cost.json"), "--round", "off",
                        "--target", path("demo_uniform.csv"), "--target", path("demo_uniform.csv")], capsys)
    assert code == 0 and json.loads(out)["converged"]


def test_io_error_exit_code(capsys, tmp_path):
    code, _, _ = run(["kappa", "--space", str(tmp_path / "nope.json"), "--factors", "2",
                      "--coupling", str(tmp_path / "p.json")], capsys)
    assert code == 1


def test_usage_error(capsys):
    assert main(["frobnicate"]) == 2
