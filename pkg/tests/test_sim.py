import math

import numpy as np
import pytest

from tfpv_lab.catalog import load_fixture
from tfpv_lab.reduce import closed_form_reduction
from tfpv_lab.sim import (
    ComparisonReport, IntegrationError, Trajectory, compare, fmt, integrate, loglog_slope,
)


def _decay():
    return (lambda y: -y), (lambda y: -np.eye(1))


@pytest.mark.parametrize("method", ["explicit", "rosenbrock", "auto"])
def test_exponential(method):
    f, jac = _decay()
    tr = integrate(f, jac, [1.0], (0.0, 1.0), rtol=1e-9, method=method)
    assert tr.y[-1, 0] == pytest.approx(math.exp(-1), rel=1e-8)
    assert tr.T == 1.0


def test_stiff_linear_switches_to_implicit():
    J = np.diag([-1.0, -1e4])
    tr = integrate(lambda y: J @ y, lambda y: J, [1.0, 1.0], (0.0, 1.0), rtol=1e-8)
    assert tr.y[-1, 0] == pytest.approx(math.exp(-1), rel=1e-6)
    assert abs(tr.y[-1, 1]) < 1e-8
    assert tr.meta["switched_at"] is not None
    assert tr.meta["steps"] < 5000


def test_mm_self_convergence():
    sc = load_fixture("mm").scenario().with_schedule([1e-2])
    p = sc.point(1e-2)
    f, jac = sc.field.system(p)
    x0 = sc.field.initial_state(p)
    t_eval = np.linspace(0, 50, 101)
    ref = integrate(f, jac, x0, (0, 50), rtol=1e-12, t_eval=t_eval)
    rtol = 1e-8
    got = integrate(f, jac, x0, (0, 50), rtol=rtol, t_eval=t_eval)
    err = np.max(np.abs(got.y - ref.y)) / np.max(np.abs(ref.y))
    assert err <= 10 * rtol


def test_tolerance_response_monotone():
    J = np.diag([-1.0, -1e3])
    f, jac = (lambda y: J @ y), (lambda y: J)
    exact = np.array([math.exp(-1), math.exp(-1e3)])
    errs = []
    for rtol in (1e-5, 5e-6, 2.5e-6, 1.25e-6):
        tr = integrate(f, jac, [1.0, 1.0], (0.0, 1.0), rtol=rtol)
        errs.append(float(np.max(np.abs(tr.y[-1] - exact))))
    assert all(b <= a for a, b in zip(errs, errs[1:]))


def test_t_eval_hits_requested_times():
    f, jac = _decay()
    t_eval = np.array([0.0, 0.25, 0.5, 1.0])
    tr = integrate(f, jac, [1.0], (0.0, 1.0), t_eval=t_eval)
    np.testing.assert_array_equal(tr.t, t_eval)
    np.testing.assert_allclose(tr.y[:, 0], np.exp(-t_eval), rtol=1e-8)


@pytest.mark.parametrize("kwargs", [
    dict(rtol=1e-2), dict(method="euler"), dict(t_span=(1.0, 1.0)),
    dict(t_eval=[0.5, 0.2]), dict(method="rosenbrock", jac=None),
])
def test_integrate_errors(kwargs):
    f, jac = _decay()
    args = dict(f=f, jac=jac, x0=[1.0], t_span=(0.0, 1.0))
    args.update(kwargs)
    with pytest.raises(IntegrationError):
        integrate(**args)


def test_non_finite_rhs():
    with pytest.raises(IntegrationError):
        integrate(lambda y: y * np.inf, None, [1.0], (0.0, 1.0))


def test_positivity_of_mass_action_run():
    sc = load_fixture("coop").scenario("fig1")
    p = sc.point(0.1)
    f, jac = sc.field.system(p)
    tr = integrate(f, jac, sc.field.initial_state(p), (0.0, 50.0), rtol=1e-9)
    assert tr.y.min() >= -1e-9


def test_trajectory_csv(tmp_path):
    tr = Trajectory(np.array([0.0, 2.0]), np.array([[1.0, 0.5], [0.25, float("nan")]]), ("S", "C"))
    text = tr.to_csv(tmp_path / "t.csv")
    assert text == "t,tau,S,C\n0.0,0.0,1.0,0.5\n2.0,1.0,0.25,nan\n"
    assert (tmp_path / "t.csv").read_text() == text
    np.testing.assert_array_equal(tr["C"][:1], [0.5])


def test_fmt():
    assert fmt(None) == ""
    assert fmt(0.1) == "0.1"
    assert float(fmt(1 / 3)) == 1 / 3


def test_loglog_slope():
    assert loglog_slope([1, 0.1, 0.01], [2, 0.2, 0.02]) == pytest.approx(1.0)
    assert math.isnan(loglog_slope([1, 0.1], [1, 0]))


def test_reduced_against_itself_is_zero():
    sc = load_fixture("uncomp").scenario("fig6")
    rm = closed_form_reduction("uncomp.e0")
    point = sc.point_dict(1.0)
    f, jac = rm.system(point)
    a = integrate(f, jac, rm.initial(point), (0.0, 20.0), rtol=1e-9, t_eval=np.linspace(0, 20, 51))
    b = integrate(f, jac, rm.initial(point), (0.0, 20.0), rtol=1e-9, t_eval=np.linspace(0, 20, 51))
    assert np.max(np.abs(a.y - b.y)) == 0.0


def test_compare_coop_fig1():
    sc = load_fixture("coop").scenario("fig1")
    rep = compare(sc, [1.0, 1e-1, 1e-2, 1e-3])
    assert rep.monotone()
    assert rep.rows[2].err_post < 1e-2
    assert 0.7 <= rep.slope <= 1.3
    lines = rep.to_csv().splitlines()
    assert lines[0] == ComparisonReport.HEADER
    assert len(lines) == 5


def test_compare_fig12B_follows_mu():
    sc = load_fixture("comp").scenario("fig12B")
    rep = compare(sc, [1.0, 1e-1, 1e-2, 1e-3])
    mus = [r.mu_star for r in rep.rows]
    np.testing.assert_allclose(mus, [12.6, 1.26, 0.126, 0.0126], rtol=0.05)
    assert rep.monotone()


def test_compare_jobs_independent():
    sc = load_fixture("uncomp").scenario("fig6")
    a = compare(sc, [1e-1, 1e-2], jobs=1)
    b = compare(sc, [1e-2, 1e-1], jobs=2)
    assert a.to_csv() == b.to_csv()
    assert [r.eps for r in a.rows] == [1e-1, 1e-2]
