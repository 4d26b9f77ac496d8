"""Acceptance criteria 1-9, one PASS/FAIL line each.

Run under pytest (lines are repeated in the terminal summary) or directly
with ``python tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from tfpv_lab.catalog import load_fixture, scenario_for_point
from tfpv_lab.lyap import (
    SlowProductGeometry, long_term_check, lyap_estimate, simulate_slow_product, verify_V_decay,
)
from tfpv_lab.params import (
    analyze, closed_forms, eps_star_generic, eqapre_holds, mu_star_generic,
)
from tfpv_lab.reduce import (
    SCENARIO_REDUCTIONS, c2_tilde, cascade_reduction, closed_form_reduction, reduce_numeric,
)
from tfpv_lab.scenario import verify_tfpv
from tfpv_lab.sim import compare, three_timescale_run
from tfpv_lab.spectral import eigenvalues

RESULTS: dict[int, str] = {}

REFERENCE_FIGURES = [
    ("coop", "fig1"), ("coop", "fig2"), ("coop", "fig3"),
    ("uncomp", "fig6"), ("uncomp", "fig7"),
    ("comp", "fig11"), ("comp", "fig12"), ("comp", "fig12B"),
    ("uncomp", "fig17A"), ("uncomp", "fig17B"),
    ("comp", "fig111"), ("comp", "fig222"),
]

# verified s = 1 parameter sets; figCfail is left out (rank fails at S = 0)
S1_FIGURES = [
    ("mm", None), ("mm.rev", None), ("mm.slowprod", None),
    ("coop", "fig1"), ("coop", "fig2"), ("coop", "fig3"), ("coop", "fig2D"),
    ("uncomp", "fig6"), ("uncomp", "fig7"), ("uncomp", "fig8"),
    ("comp", "fig11"), ("comp", "fig12"), ("comp", "fig12B"), ("comp", "fig12AA"),
]


def record(k: int, ok: bool, detail: str) -> bool:
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS[k] = line
    print(line)
    return ok


def _fmt(x):
    return f"{x:.4g}"


# ------------------------------------------------------------------ 1

def criterion_1():
    t0 = time.perf_counter()
    bad, n = [], 0
    for fid, fig in REFERENCE_FIGURES:
        fx = load_fixture(fid)
        assert fx.in_criterion1(fig)
        for c in fx.check_expected(fig):
            n += 1
            if not c.ok:
                note = " (known mismatch)" if c.known_mismatch else ""
                bad.append(f"{fig} {c.name}: {_fmt(c.computed)} vs {_fmt(c.expected)}{note}")
    dt = time.perf_counter() - t0
    ok = not bad and dt < 5.0
    detail = f"{n - len(bad)}/{n} reference values within 5%, {dt:.2f}s"
    if bad:
        detail += "; off: " + "; ".join(bad)
    return record(1, ok, detail)


# ------------------------------------------------------------------ 2

def _random_point(rng, names):
    return {k: float(10 ** rng.uniform(-1, 1)) for k in names}


def _comp_box_top(p):
    # sigma_1 = a + b s and sigma_2 = c + d s on the manifold; the mu ratio
    # peaks at s* = (b c - 2 a d) / (b d) when eqApre fails
    a = p["k2"] + p["km1"] + p["k3"] * p["i0"] + p["km3"]
    b = p["k1"]
    c = (p["k2"] + p["km1"]) * (p["k3"] * p["i0"] + p["km3"])
    d = p["k1"] * p["km3"]
    s_star = (b * c - 2 * a * d) / (b * d)
    return max(p["s0"], 2 * s_star)


def criterion_2(n_points: int = 20, rtol: float = 1e-6):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    names = ["k1", "km1", "k2", "k3", "km3", "e0", "i0", "s0"]
    worst = {}
    fails = []
    selections = {"mu_I1": 0, "mu_I2": 0}
    for net, eps_name, mu_name in (("uncomp", "eps_U", "mu_U"), ("comp", "eps_I", "mu_I")):
        for i in range(n_points):
            p = _random_point(rng, names)
            sc = scenario_for_point(net, p)
            cat = closed_forms(net, p)
            if net == "comp":
                pick = "mu_I1" if eqapre_holds(p) else "mu_I2"
                selections[pick] += 1
                if pick == "mu_I2":
                    sc = sc.with_box({"S": (0.0, _comp_box_top(p))})
            e = eps_star_generic(sc).hi
            m = mu_star_generic(sc)[0].hi
            for name, got in ((eps_name, e), (mu_name, m)):
                err = abs(got - cat[name]) / abs(cat[name])
                worst[name] = max(worst.get(name, 0.0), err)
                if err > rtol:
                    fails.append(f"{net} point {i} {name}: {_fmt(got)} vs {_fmt(cat[name])}")
    dt = time.perf_counter() - t0
    ok = not fails and dt < 10.0
    detail = (f"{2 * n_points} points, worst rel err "
              + ", ".join(f"{k} {v:.1e}" for k, v in sorted(worst.items()))
              + f", eqApre picks {selections}, {dt:.2f}s")
    if fails:
        detail += "; " + "; ".join(fails[:5])
    return record(2, ok, detail)


# ------------------------------------------------------------------ 3, 4

def _spectra(sc, eps, grid):
    X = sc.embed(sc.grid(grid))
    p = sc.point(eps)
    J = sc.field.jacobian(X, p)
    return [eigenvalues(Ji).by_modulus() for Ji in J]


def criterion_3(grid: int = 101):
    viol, checked, worst = [], 0, {}
    for fid, fig in S1_FIGURES:
        sc = load_fixture(fid).scenario(fig)
        if not verify_tfpv(sc, grid=grid).passed:
            viol.append(f"{fid}/{fig} not verified")
            continue
        for eps in sorted(sc.eps_schedule)[:2]:
            eb = eps_star_generic(sc, grid, eps)
            lo, hi = eb.lo / 1.1, 1.1 * eb.hi
            for lam in _spectra(sc, eps, grid):
                r = abs(lam[0] / sum(lam[1:]))
                checked += 1
                if not lo <= r <= hi:
                    key = f"{fid}/{fig} eps={eps:g}"
                    # factor by which the ratio leaves the band; 1 means on the edge
                    f = max(lo / r, r / hi) * 1.1
                    if f > worst.get(key, (0.0,))[0]:
                        worst[key] = (f, r, lo, hi)
    viol = [f"{k}: ratio {_fmt(r)} outside [{_fmt(lo)}, {_fmt(hi)}] (bound off by {f:.3g}x)"
            for k, (f, r, lo, hi) in worst.items()]
    return record(3, not viol, f"{checked} grid checks on {len(S1_FIGURES)} s=1 parameter sets"
                  + ("; " + "; ".join(viol) if viol else ""))


def criterion_4(grid: int = 101):
    viol, checked, flagged, gates = [], 0, [], {}
    for fid, fig in S1_FIGURES:
        sc = load_fixture(fid).scenario(fig)
        eps = min(sc.eps_schedule)
        mb, gate = mu_star_generic(sc, grid, eps)
        gates[gate] = gates.get(gate, 0) + 1
        if gate == "violated":
            flagged.append(f"{fid}/{fig}")
            continue
        factor = 1.1 if gate == "all_real" else 1.1 * math.sqrt(2)
        for lam in _spectra(sc, eps, grid):
            r = abs(lam[0] / lam[1])
            checked += 1
            if r > factor * mb.hi:
                viol.append(f"{fid}/{fig}: {_fmt(r)} > {_fmt(factor * mb.hi)}")
    detail = f"{checked} grid checks, gates {gates}"
    if flagged:
        detail += f", flagged (not bounded): {', '.join(flagged)}"
    if viol:
        detail += "; " + "; ".join(viol[:5])
    return record(4, not viol, detail)


# ------------------------------------------------------------------ 5

def criterion_5(n_points: int = 50):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst, fails = 0.0, []
    for (stem, scen), model in sorted(SCENARIO_REDUCTIONS.items()):
        fx = load_fixture(stem)
        fid = stem if scen == fx.doc["default_scenario"] else f"{stem}.{scen}"
        sc = load_fixture(fid).scenario()
        if sc.s == 1:
            U = sc.grid(n_points)
        else:
            lo = np.array([b[1] for b in sc.box])
            hi = np.array([b[2] for b in sc.box])
            U = lo + (hi - lo) * rng.random((n_points, sc.s))
        rm = closed_form_reduction(model, sc.field.states)
        point = dict(sc.point_dict(1.0), **sc.extras)
        num = reduce_numeric(sc, sc.embed(U))[:, list(sc.slow_index)]
        ref = np.array([rm.rhs(u, point) for u in U])
        err = np.abs(num - ref) / (1 + np.abs(ref))
        worst = max(worst, float(err.max()))
        if err.max() > 1e-8:
            fails.append(f"{model}: {err.max():.2e}")
    dt = time.perf_counter() - t0
    ok = not fails and dt < 5.0
    return record(5, ok, f"{len(SCENARIO_REDUCTIONS)} reductions x {n_points} points, "
                  f"worst {worst:.1e}, {dt:.2f}s" + ("; " + "; ".join(fails) if fails else ""))


# ------------------------------------------------------------------ 6

TIKHONOV = [("coop", "fig1"), ("uncomp", "fig6"), ("comp", "fig11"),
            ("uncomp", "fig17A"), ("comp", "fig111")]


def criterion_6(rtol: float = 1e-9):
    t0 = time.perf_counter()
    parts, ok = [], True
    for fid, fig in TIKHONOV:
        rep = compare(load_fixture(fid).scenario(fig), rtol=rtol)
        good = rep.monotone() and 0.7 <= rep.slope <= 1.3
        ok &= good
        parts.append(f"{fig} slope {rep.slope:.3f}{'' if rep.monotone() else ' non-monotone'}")
    dt = time.perf_counter() - t0
    ok = ok and dt < 120.0
    return record(6, ok, ", ".join(parts) + f", {dt:.1f}s")


# ------------------------------------------------------------------ 7

def criterion_7():
    notes, ok = [], True
    mm = verify_tfpv(load_fixture("mm.degenerate").scenario())
    mm_ok = not mm.passed and any("sigma_hat_2 vanishes" in f for f in mm.failures)
    coop = verify_tfpv(load_fixture("coop.degenerate").scenario())
    coop_ok = not coop.passed and any("vanishes" in f or "rank" in f for f in coop.failures)
    ok &= mm_ok and coop_ok
    notes.append(f"mm.degenerate {'fails' if mm_ok else 'passes'}, "
                 f"coop.degenerate {'fails' if coop_ok else 'passes'}")

    fx = load_fixture("coop")
    res = analyze(fx.scenario("figCfail"), network_id="coop")
    flag = bool(res.flags.mu_large_eps_small)
    ok &= flag
    notes.append(f"figCfail mu_large_eps_small={flag} (eps*={_fmt(res.eps_star)}, mu*={_fmt(res.mu_star)})")

    small = fx.scenario("figCfail_small")
    bad = compare(small, [1.0]).rows[0]
    # fig1 run at the eps that gives it the same eps*
    fig1 = fx.scenario("fig1")
    eps_match = bad.eps_star / eps_star_generic(fig1).hi
    ref = compare(fig1, [eps_match]).rows[0]
    big = bad.err_post > 10 * ref.err_post
    ok &= big
    notes.append(f"small-s0 error {_fmt(bad.err_post)} vs fig1 {_fmt(ref.err_post)} at eps*={_fmt(bad.eps_star)}")
    return record(7, ok, "; ".join(notes))


# ------------------------------------------------------------------ 8

def criterion_8():
    rng = np.random.default_rng(8)
    notes, ok = [], True
    g = SlowProductGeometry(1.0, 1.0, 1.0)
    s0 = 1.0
    x = np.linspace(0.0, s0 + g.e0, 10_000)
    q_ok = bool(np.all(np.abs(g.dq(x)) <= 1 + 1e-12) and np.all(g.q(x) >= g.q_floor * (1 - 1e-12)))
    for _ in range(3):
        gg = SlowProductGeometry(*(10 ** rng.uniform(-1, 1, 3)))
        xx = np.linspace(0.0, 1.0 + gg.e0, 10_000)
        q_ok &= bool(np.all(np.abs(gg.dq(xx)) <= 1 + 1e-12)
                     and np.all(gg.q(xx) >= gg.q_floor * (1 - 1e-12)))
    ok &= q_ok
    notes.append(f"q invariants {'hold' if q_ok else 'fail'}")
    worst = 0.0
    v_ok = True
    for _ in range(5):
        k1, km1, e0, s0 = 10 ** rng.uniform(-1, 1, 4)
        k2 = 10 ** rng.uniform(-3, -1)
        est = lyap_estimate(k1, km1, k2, e0, s0)
        T = 10.0 / est.gamma + 5.0
        rep = verify_V_decay(simulate_slow_product(k1, km1, k2, e0, s0, T), est)
        v_ok &= rep.passed
        worst = max(worst, rep.max_ratio)
    ok &= v_ok
    notes.append(f"V bound on 5 sets {'holds' if v_ok else 'fails'} (max V/bound {worst:.3f})")
    lt = long_term_check(1.0, 1.0, 1e-2, 1.0, 1.0)
    ok &= lt.passed
    notes.append(f"long-term {_fmt(lt.max_discrepancy)} <= 1.05*{_fmt(lt.bound)}: {lt.passed}")
    return record(8, ok, "; ".join(notes))


# ------------------------------------------------------------------ 9

def _bisect(f, a, b, iters=200):
    fa = f(a)
    for _ in range(iters):
        m = 0.5 * (a + b)
        fm = f(m)
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def criterion_9():
    fx = load_fixture("comp.cascade")
    sc = fx.scenario()
    p = dict(sc.point_dict(1.0), **sc.extras)
    cm = cascade_reduction(p)
    k3, km3, e0, i0 = p["k3"], p["km3"], p["e0"], p["i0"]
    oracle = _bisect(lambda c: k3 * (e0 - c) * (i0 - c) - km3 * c, 0.0, min(e0, i0))
    c_ok = abs(cm.c2_tilde - oracle) <= 1e-8 * oracle and abs(cm.c2_tilde - 49.99) <= 0.05 * 49.99
    assert cm.c2_tilde == c2_tilde(k3, km3, e0, i0)
    rep = three_timescale_run(cm, sc)
    ok = c_ok and rep.stage1_tracks and rep.stage2_tracks
    return record(9, ok, f"c2_tilde {cm.c2_tilde:.6f} (bisection {oracle:.6f}), "
                  f"stage-1 c2 err {rep.err_c2_slow:.2e}, stage-2 s err {rep.err_s_very_slow:.2e}, "
                  f"c2 vs c2_tilde {rep.err_c2_very_slow:.2e}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("k", range(1, 10))
def test_criterion(k):
    assert CRITERIA[k - 1](), RESULTS[k]


if __name__ == "__main__":
    for crit in CRITERIA:
        crit()
