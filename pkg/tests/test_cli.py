import json
import subprocess
import sys

import numpy as np
import pytest

from projfinsler.cli import main
from projfinsler.report import dumps


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_klein_example_and_determinism(tmp_path, capsys):
    argv = ["verify", "--family", "klein", "--c", "1", "--dim", "3", "--samples", "500", "--seed", "7"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rep = json.loads(a.read_text())
    assert list(rep) == ["family", "params", "lambda", "n", "seed", "sample_count", "max_rapcsak",
                         "max_eq3a", "max_eq3b", "max_eq6", "min_eigen_g", "max_flag_dev",
                         "max_geodesic_dev", "det_crosscheck_max_rel", "pass", "tool_version"]
    assert rep["pass"] is True
    assert rep["lambda"] == -1.0
    assert rep["max_flag_dev"] < 1e-6
    assert rep["min_eigen_g"] > 0


def test_verify_failure_exit_code(capsys):
    code, out, err = run(["verify", "--family", "funk", "--samples", "20", "--tol", "1e-30"], capsys)
    assert code == 1
    assert json.loads(out)["pass"] is False
    assert "failed" in err


def test_verify_usage_errors(capsys):
    code, _, err = run(["verify", "--family", "klein", "--c", "-1"], capsys)
    assert code == 2 and "c must be positive" in err
    code, _, err = run(["verify", "--family", "neg-pair", "--d1", "0.6", "--d2", "0.1"], capsys)
    assert code == 2 and "d2 > d1 > 0" in err
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--family", "not-a-family"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--family", "berwald", "--sign", "sideways"])
    assert exc.value.code == 2


def _grid(code_out):
    code, out, _ = code_out
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "z1,z2,phi_tilde,K_numeric,det_g,min_eigen_g"
    return [ln.split(",") for ln in lines[1:]]


def test_grid_euclidean(capsys):
    rows = _grid(run(["grid", "--family", "euclidean", "--resolution", "3",
                      "--z1-range", "0,1", "--z2-range", "0,1"], capsys))
    assert len(rows) == 9
    assert all(r[2] == "1.0" for r in rows)
    # row-major: z1 outer, z2 inner
    assert [float(r[1]) for r in rows[:3]] == [0.0, 0.5, 1.0]
    assert float(rows[3][0]) == 0.5


def test_grid_klein_curvature(capsys):
    rows = _grid(run(["grid", "--family", "klein", "--c", "1", "--z1-range", "0,0.9",
                      "--z2-range", "0,0.9", "--resolution", "8"], capsys))
    K = [float(r[3]) for r in rows if r[3]]
    assert len(K) > 20
    assert max(abs(k + 1) for k in K) < 1e-6
    for r in rows:
        inside = float(r[0]) ** 2 + float(r[1]) ** 2 < 1
        assert bool(r[2]) == inside


def test_grid_neg_pair_domain(capsys):
    rows = _grid(run(["grid", "--family", "neg-pair", "--d1", "0.1", "--d2", "0.6",
                      "--z1-range", "0,1.2", "--z2-range", "0,1.2", "--resolution", "7"], capsys))
    for r in rows:
        rr = float(r[0]) ** 2 + float(r[1]) ** 2
        if rr >= 1.0:
            assert r[2:] == ["", "", "", ""]
        elif rr < 0.99:
            assert all(r[2:]) and float(r[5]) > 0


def test_grid_bad_range(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["grid", "--family", "klein", "--z1-range", "0.5"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["grid", "--family", "klein", "--z1-range", "1,0"])
    assert exc.value.code == 2
    code, _, _ = run(["grid", "--family", "klein", "--z1-range=-1,0"], capsys)
    assert code == 2


def test_geodesic_csv(capsys):
    code, out, _ = run(["geodesic", "--family", "euclidean", "--x0", "0,0,0", "--y0", "1,2,0",
                        "--steps", "50"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "t,x_1,x_2,x_3,speed,F_along"
    assert lines[-1].startswith("# straightness_deviation,")
    assert float(lines[-1].split(",")[1]) < 1e-15
    assert len(lines) == 1 + 51 + 1


def test_geodesic_funk(capsys):
    code, out, _ = run(["geodesic", "--family", "funk", "--x0", "0.2,0,0", "--y0", "0,1,0"], capsys)
    assert code == 0
    dev = float(out.splitlines()[-1].split(",")[1])
    assert dev < 1e-8
    F = np.array([float(ln.split(",")[-1]) for ln in out.splitlines()[1:-1]])
    assert np.max(np.abs(F - F[0])) / F[0] < 1e-8


def test_geodesic_errors(capsys):
    code, _, _ = run(["geodesic", "--family", "funk", "--x0", "2,0,0", "--y0", "0,1,0"], capsys)
    assert code == 2
    code, _, err = run(["geodesic", "--family", "funk", "--x0", "0.975,0,0", "--y0", "1,0,0",
                        "--dt", "0.1"], capsys)
    assert code == 1 and "left the domain" in err
    code, _, _ = run(["geodesic", "--family", "funk", "--x0", "0,0", "--y0", "1,0,0"], capsys)
    assert code == 2


@pytest.mark.parametrize("suite", ["ode-lemma", "k1-system", "kneg1-system", "conserved"])
def test_classify_suites_pass(suite, capsys):
    code, out, _ = run(["classify-lab", "--suite", suite], capsys)
    assert code == 0
    rows = json.loads(out)
    assert rows and all(r["pass"] for r in rows)
    assert all(list(r) == ["check", "max_residual", "tolerance", "pass"] for r in rows)


def test_classify_ode_lemma_tolerance(capsys):
    _, out, _ = run(["classify-lab", "--suite", "ode-lemma"], capsys)
    assert all(r["max_residual"] < 1e-12 for r in json.loads(out))


@pytest.mark.parametrize("suite", ["ode-lemma", "k1-system", "kneg1-system", "conserved"])
def test_classify_perturbed(suite, capsys):
    code, out, _ = run(["classify-lab", "--suite", suite, "--perturb", "0.01"], capsys)
    assert code == 1
    assert not any(r["pass"] for r in json.loads(out))


def test_classify_remarks(capsys):
    code, out, _ = run(["classify-lab", "--suite", "remarks"], capsys)
    rows = {r["check"]: r for r in json.loads(out)}
    # the literal Bryant parameters do not reproduce the Bryant metric; the rest hold
    assert not rows["bryant_type(sin^2(2a)/4, cos(2a)/2) == bryant_classic(a)"]["pass"]
    others = [r for k, r in rows.items() if not k.startswith("bryant_type(sin^2")]
    assert len(others) == 4 and all(r["pass"] for r in others)
    assert code == 1


def test_classify_unknown_suite(capsys):
    code, _, err = run(["classify-lab", "--suite", "bogus"], capsys)
    assert code == 2 and "unknown suite" in err


def test_json_formatting():
    assert dumps({"a": 0.1, "b": float("nan"), "c": [1.0, float("inf")], "d": True}) == \
        '{"a": 0.10000000000000001, "b": null, "c": [1.0, null], "d": true}'


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "projfinsler", "classify-lab", "--suite", "bogus"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "unknown suite" in proc.stderr
    proc = subprocess.run([sys.executable, "-m", "projfinsler", "grid", "--family", "euclidean",
                           "--resolution", "2"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("z1,z2,phi_tilde")
