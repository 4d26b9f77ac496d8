import json
import subprocess
import sys

import pytest

from tfpv_lab.cli import main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_fig1(capsys):
    code, out, _ = run(["analyze", "--fixture", "coop", "--figure", "fig1"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["eps_star"] == pytest.approx(0.125, rel=1e-9)
    assert doc["mu_star"] == pytest.approx(0.5, rel=1e-9)


def test_sweep_fig12B(capsys):
    code, out, _ = run(["sweep", "--fixture", "comp", "--figure", "fig12B",
                        "--eps", "1,1e-1,1e-2,1e-3"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "eps,eps_star,mu_star,t_c,err_post,err_full,slope"
    assert len(lines) == 5
    errs = [float(r.split(",")[4]) for r in lines[1:]]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_validate_degenerate(capsys):
    code, out, err = run(["validate", "--fixture", "mm.degenerate"], capsys)
    assert code == 1
    assert "sigma_hat_2 vanishes" in err
    assert json.loads(out)["expect_fail"] is True


def test_validate_ok(capsys):
    code, out, _ = run(["validate", "--fixture", "comp"], capsys)
    assert code == 0 and json.loads(out)["passed"] is True


@pytest.mark.parametrize("argv", [
    ["analyze"],
    ["analyze", "--fixture", "nope"],
    ["analyze", "--fixture", "coop", "--grid", "1"],
    ["sweep", "--fixture", "coop", "--eps", "a,b"],
    ["sweep", "--fixture", "coop", "--eps", "-1"],
    ["bogus"],
    ["simulate", "--fixture", "coop", "--eps", "1,2"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 2


def test_reduce_csv_and_json(capsys):
    code, out, _ = run(["reduce", "--fixture", "coop", "--figure", "fig1", "--grid", "3"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "S,dS,dS_closed"
    assert len(lines) == 4
    for row in lines[1:]:
        _, a, b = map(float, row.split(","))
        assert a == pytest.approx(b, rel=1e-9, abs=1e-15)
    code, out, _ = run(["reduce", "--fixture", "coop", "--sample", "4", "--seed", "3",
                        "--format", "json"], capsys)
    assert len(json.loads(out)["rows"]) == 4


def test_simulate(capsys, tmp_path):
    target = tmp_path / "run.csv"
    code, _, _ = run(["simulate", "--fixture", "mm", "--eps", "0.1", "--T", "5",
                      "--points", "11", "--out", str(target)], capsys)
    assert code == 0
    lines = target.read_text().strip().splitlines()
    assert lines[0] == "t,tau,S,C"
    assert len(lines) == 12


def test_lyap(capsys):
    code, out, _ = run(["lyap", "--k1", "1", "--km1", "1", "--k2", "0.01", "--e0", "1",
                        "--s0", "1"], capsys)
    assert code == 0
    est = json.loads(out)["estimate"]
    assert est["gamma"] == pytest.approx(1.0)
    assert est["eps_PE"] == pytest.approx(0.02)


def test_fixtures_list_and_check(capsys):
    code, out, _ = run(["fixtures", "list", "--format", "csv"], capsys)
    assert code == 0 and "comp.cascade" in out
    code, out, _ = run(["fixtures", "check", "uncomp", "--figure", "fig6"], capsys)
    assert code == 0
    assert all(c["ok"] for c in json.loads(out))


def test_cascade(capsys, tmp_path):
    code, out, _ = run(["cascade", "--out", str(tmp_path / "c.csv")], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["c2_tilde"] == pytest.approx(49.99, abs=5e-3)
    assert (tmp_path / "c_stage2.csv").is_file()
    assert (tmp_path / "c_report.json").is_file()


def _cli(*argv):
    return subprocess.run([sys.executable, "-m", "tfpv_lab", *argv],
                          capture_output=True, text=True, check=False)


def test_golden_determinism():
    for argv in (["analyze", "--fixture", "uncomp", "--figure", "fig7"],
                 ["reduce", "--fixture", "comp.k1k3km3", "--sample", "5", "--seed", "7"],
                 ["sweep", "--fixture", "uncomp", "--eps", "1e-1,1e-2"]):
        a, b = _cli(*argv), _cli(*argv)
        assert a.returncode == 0, a.stderr
        assert a.stdout == b.stdout
