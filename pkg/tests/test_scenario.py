import json

import numpy as np
import pytest

from tfpv_lab.catalog import load_fixture
from tfpv_lab.scenario import (
    ScenarioError, eigenvalue_order_check, expansion_coefficients, load_scenario,
    sigma_expansion, sigma_functions, spectrum_at, verify_tfpv,
)
from tfpv_lab.spectral import charpoly_coeffs

MM_DOC = {
    "network": "mm_irrev.crn",
    "eliminate": {"E + C": "e0", "P + S + C": "s0"},
    "pi_hat": {"k1": 1, "km1": 1, "k2": 1, "e0": 0, "s0": 1},
    "rho": {"e0": 1},
    "s": 1,
    "chart": {"slow": ["S"], "graph": {"C": "0"}},
    "box": {"S": [0, 1]},
    "eps": [1e-1, 1e-2, 1e-4, 1e-5],
}


@pytest.fixture(scope="module")
def mm():
    return load_scenario(MM_DOC)


def test_load_from_text_and_file(tmp_path, mm):
    assert load_scenario(json.dumps(MM_DOC)).pi_hat == mm.pi_hat
    path = tmp_path / "mm.json"
    path.write_text(json.dumps(MM_DOC))
    assert load_scenario(path).box == (("S", 0.0, 1.0),)


@pytest.mark.parametrize("patch, fragment", [
    ({"s": 2}, "manifold dimension"),
    ({"box": {"S": [1, 0]}}, "box"),
    ({"rho": {"e0": -1}}, "negative"),
    ({"chart": {"slow": ["S"], "graph": {}}}, "cover"),
    ({"pi_hat": {"k1": 1, "k2": 1, "e0": 0, "s0": 1}}, "missing"),
])
def test_invalid_scenarios(patch, fragment):
    with pytest.raises(ScenarioError, match=fragment):
        load_scenario({**MM_DOC, **patch})


def test_non_equilibrium_chart_rejected():
    sc = load_scenario({**MM_DOC, "chart": {"slow": ["S"], "graph": {"C": "0.5"}}})
    with pytest.raises(ScenarioError, match="not an equilibrium"):
        sc.embed([[0.5]])


def test_verify_mm_passes(mm):
    rep = verify_tfpv(mm)
    assert rep.passed, rep.failures


def test_verify_mm_degenerate_fails():
    rep = verify_tfpv(load_fixture("mm.degenerate").scenario())
    assert not rep.passed
    assert not rep.checks["nondegenerate"]
    assert any("sigma_hat_2 vanishes" in f for f in rep.failures)


def test_verify_comp_min_sigma2():
    fx = load_fixture("comp")
    sc = fx.scenario("fig12")
    rep = verify_tfpv(sc)
    assert rep.passed
    p = sc.point_dict(1.0)
    expected = (p["km1"] + p["k2"]) * (p["k3"] * p["i0"] + p["km3"])
    assert rep.sigma_ranges["sigma_2"][0] == pytest.approx(expected, rel=1e-9)


def test_verify_sigma_positive_on_fast_block():
    for fid in ("mm", "mm.rev", "mm.slowprod", "coop", "uncomp", "comp",
                "uncomp.k1km3", "comp.k1k3km3"):
        sc = load_fixture(fid).scenario()
        rep = verify_tfpv(sc, grid=21)
        assert rep.passed, (fid, rep.failures)
        for i in range(1, sc.n - sc.s + 1):
            assert rep.sigma_ranges[f"sigma_{i}"][0] > 0


def test_chart_points_are_equilibria():
    for fid in ("coop", "mm.slowprod", "comp.k1k3km3", "uncomp.k1km3"):
        sc = load_fixture(fid).scenario()
        X = sc.embed(sc.grid(21))
        r = np.linalg.norm(sc.field.evaluate(X, sc.pi_hat_vec), axis=-1)
        assert np.all(r <= 1e-9 * sc.chart_scale(X))


def test_coop_expansion_at_zero():
    sc = load_fixture("coop").scenario("fig1")
    x = sc.embed([[0.0]])[0]
    ex = sigma_expansion(sc, x)
    assert ex.sigma(1, 0.0) == pytest.approx(4.0, rel=1e-12)
    assert ex.sigma(2, 0.0) == pytest.approx(4.0, rel=1e-12)
    assert ex.sigma_hat(3, 0.0) == pytest.approx(2.0, rel=1e-12)
    assert ex.orders[2] >= 1


def test_slowprod_sigma_hat2_closed_form():
    fx = load_fixture("mm.slowprod")
    sc = fx.scenario()
    p = sc.point_dict(1.0)
    k2s = sc.rho["k2"]
    for u in (0.0, 0.3, 0.77, 1.0):
        x = sc.embed([[u]])[0]
        ex = sigma_expansion(sc, x)
        ref = k2s * p["km1"] * p["k1"] * p["e0"] / (p["k1"] * u + p["km1"])
        assert ex.sigma_hat(2, 0.0) == pytest.approx(ref, rel=1e-9)


def test_sigma1_structure(mm):
    # sigma_1 is affine in eps on a ray that only moves e0
    ex = sigma_expansion(mm, mm.embed([[0.4]])[0])
    assert ex.orders[0] == 0
    assert all(abs(c) < 1e-12 for c in ex.coeffs[0][2:])


@pytest.mark.parametrize("fid", ["coop", "uncomp", "comp", "uncomp.k1km3", "comp.k1k3km3", "mm.rev"])
def test_expansion_consistency(fid):
    sc = load_fixture(fid).scenario()
    X = sc.embed(sc.grid(11))
    coeffs, _ = expansion_coefficients(sc, X)
    for eps in sc.eps_schedule:
        direct = sigma_functions(sc.field)(X, sc.point(eps))
        interp = np.polynomial.polynomial.polyval(eps, coeffs.transpose(2, 0, 1))
        scale = np.maximum(np.abs(direct), 1e-300)
        err = np.abs(interp - direct) / np.maximum(scale, 1e-12 * np.abs(direct).max())
        assert err.max() <= 1e-9
        J = sc.field.jacobian(X[3], sc.point(eps))
        np.testing.assert_allclose(charpoly_coeffs(J).sigma, direct[3], rtol=1e-9, atol=1e-14)


def test_forced_orders(mm):
    ex = sigma_expansion(mm, mm.embed([[0.6]])[0])
    assert ex.expected == (0, 1)
    assert ex.orders[1] >= 1


def test_eigen_order_mm(mm):
    x = mm.embed([[0.5]])[0]
    rep = eigenvalue_order_check(mm, x)
    assert rep.eps == (1e-4, 1e-5)
    assert rep.ok
    # lambda_slow / eps -> -sigma_hat_2 / sigma_1 = -k1 k2 / (k1 s + km1 + k2)
    lam = spectrum_at(mm, x, 1e-5).by_modulus()[0] / 1e-5
    ref = -1.0 / (0.5 + 2.0)
    assert lam.real == pytest.approx(ref, rel=1e-3)


def test_slow_eigenvalue_zero_at_tfpv(mm):
    sp = spectrum_at(mm, mm.embed([[0.3]])[0], 0.0)
    assert min(abs(z) for z in sp.values) == 0.0


def test_comp_two_slow_eigenvalues():
    sc = load_fixture("comp.k1k3km3").scenario().with_schedule([1e-4, 1e-5])
    x = sc.embed([[0.5, 0.3]])[0]
    rep = eigenvalue_order_check(sc, x)
    assert len(rep.slow_ratios[0]) == 2
    assert rep.ok


def test_eigen_order_needs_two_eps(mm):
    with pytest.raises(ScenarioError):
        eigenvalue_order_check(mm, mm.embed([[0.5]])[0], [1e-3])


def test_grid_cap():
    sc = load_fixture("comp.k1k3km3").scenario()
    assert len(sc.grid(5000)) <= 10**6
    assert sc.grid(3).shape == (9, 2)
