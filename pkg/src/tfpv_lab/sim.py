"""Integration of full and reduced systems, and the full-vs-reduced harness.

Two adaptive integrators share one driver: Dormand-Prince 5(4) for nonstiff
stretches and the L-stable Rosenbrock method ROS3 (Sandu et al. 1997,
"Benchmarking stiff ODE solvers for atmospheric chemistry problems II") for
stiff ones.  In ``auto`` mode the driver starts explicit and switches for the
rest of the run once the step collapses or the stiffness estimate stays high.
"""

from __future__ import annotations

import io
import math
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .params import eps_star_generic, mu_star_generic
from .reduce import (CascadeModel, ReducedModel, closed_form_reduction, numeric_reduced_model,
                     spectral_projector, ProjectorError)
from .scenario import Scenario, ScenarioError

__all__ = [
    "IntegrationError",
    "Trajectory",
    "integrate",
    "ComparisonRow",
    "ComparisonReport",
    "compare",
    "reduced_for",
    "transient_onset",
    "horizon_for",
    "loglog_slope",
    "CascadeReport",
    "three_timescale_run",
    "fmt",
]

COLLAPSE_FRAC = 1e-6
COLLAPSE_STEPS = 20
UNDERFLOW_FRAC = 1e-14
STIFF_HRHO = 2.5      # h*|lambda| where the explicit controller settles on the stability edge
STIFF_STEPS = 15
HORIZON_DROP = 1e-3

Rhs = Callable[[np.ndarray], np.ndarray]


class IntegrationError(RuntimeError):
    pass


def fmt(x) -> str:
    """Shortest round-trip decimal; empty for missing values."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


# ------------------------------------------------------------------ trajectory

@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray
    names: tuple[str, ...]
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> float:
        return float(self.t[-1])

    @property
    def tau(self) -> np.ndarray:
        return self.t / self.T if self.T > 0 else np.zeros_like(self.t)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.y[:, self.names.index(name)]

    def to_csv(self, target=None) -> str:
        buf = io.StringIO()
        buf.write(",".join(("t", "tau") + self.names) + "\n")
        for ti, taui, row in zip(self.t, self.tau, self.y):
            buf.write(",".join([fmt(ti), fmt(taui)] + [fmt(v) for v in row]) + "\n")
        text = buf.getvalue()
        if target is not None:
            with open(target, "w") as fh:
                fh.write(text)
        return text


# ------------------------------------------------------------------ steppers

_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def _dopri(f: Rhs, y, h, k1):
    k = [k1]
    for i in range(1, 7):
        yi = y + h * sum(a * kj for a, kj in zip(_DP_A[i], k) if a != 0.0)
        k.append(f(yi))
    y_new = yi                       # stage 7 sits at the solution (FSAL)
    err = h * sum(e * kj for e, kj in zip(_DP_E, k) if e != 0.0)
    return y_new, err, k[6]


_R_GAMMA = 0.43586652150845900
_R_C21, _R_C31, _R_C32 = -1.0156171083877702, 4.0759956452537700, 9.2076794298330791
_R_M = (1.0, 6.1697947043828246, -0.42772256543218573)
_R_E = (0.5, -2.9079558716805470, 0.22354069897811570)


def _ros3(f: Rhs, jac, y, h, fy):
    n = y.size
    G = np.eye(n) / (h * _R_GAMMA) - jac(y)
    K1 = np.linalg.solve(G, fy)
    f2 = f(y + K1)
    K2 = np.linalg.solve(G, f2 + (_R_C21 / h) * K1)
    # the third stage shares the second stage's abscissa
    K3 = np.linalg.solve(G, f2 + (_R_C31 / h) * K1 + (_R_C32 / h) * K2)
    y_new = y + _R_M[0] * K1 + _R_M[1] * K2 + _R_M[2] * K3
    err = _R_E[0] * K1 + _R_E[1] * K2 + _R_E[2] * K3
    return y_new, err


def integrate(f: Rhs, jac, x0, t_span: tuple[float, float], rtol: float = 1e-9,
              atol: float | None = None, method: str = "auto", t_eval=None,
              names: Sequence[str] | None = None, meta: Mapping | None = None,
              h0: float | None = None, max_steps: int = 5_000_000) -> Trajectory:
    """Adaptive integration of the autonomous system x' = f(x).

    ``method`` is ``"explicit"``, ``"rosenbrock"`` or ``"auto"``.  With
    ``t_eval`` the steps are clipped to land on every requested time;
    otherwise every accepted step is returned.
    """
    if not 1e-12 <= rtol <= 1e-3:
        raise IntegrationError(f"rtol {rtol} outside [1e-12, 1e-3]")
    if method not in ("auto", "explicit", "rosenbrock"):
        raise IntegrationError(f"unknown method {method!r}")
    if method != "explicit" and jac is None:
        if method == "rosenbrock":
            raise IntegrationError("the Rosenbrock method needs a Jacobian")
        method = "explicit"
    y = np.array(x0, dtype=float)
    if not np.all(np.isfinite(y)):
        raise IntegrationError("non-finite initial state")
    t0, t1 = float(t_span[0]), float(t_span[1])
    span = t1 - t0
    if span <= 0:
        raise IntegrationError(f"empty time span {t_span}")
    if atol is None:
        atol = rtol * 1e-6 * max(float(np.max(np.abs(y))), 1e-300)
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if t_eval[0] < t0 or t_eval[-1] > t1 or np.any(np.diff(t_eval) <= 0):
            raise IntegrationError("t_eval must be increasing inside t_span")
    names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(y.size))

    def rhs(x):
        v = f(x)
        if not np.all(np.isfinite(v)):
            raise IntegrationError(f"non-finite right-hand side at t={t:.6g}")
        return v

    t = t0
    fy = rhs(y)
    stiff = method == "rosenbrock"
    if h0 is None:
        d0 = np.max(np.abs(y) / (atol + rtol * np.abs(y)))
        d1 = np.max(np.abs(fy) / (atol + rtol * np.abs(y)))
        h0 = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6 * span
    h = min(float(h0), span)
    out_t, out_y = [t0], [y.copy()]
    next_out = 0
    if t_eval is not None:
        out_t, out_y = [], []
        while next_out < t_eval.size and t_eval[next_out] <= t0:
            out_t.append(t0)
            out_y.append(y.copy())
            next_out += 1
    err_prev = 1.0
    small_run = stiff_run = 0
    steps = rejected = 0
    switched_at = None

    while t < t1 and (t_eval is None or next_out < t_eval.size):
        if steps + rejected > max_steps:
            raise IntegrationError(f"more than {max_steps} steps at t={t:.6g}")
        target = t1 if t_eval is None else t_eval[next_out]
        hit = t + h >= target - 1e-13 * span
        hh = target - t if hit else h
        if hh < UNDERFLOW_FRAC * span and not hit:
            raise IntegrationError(f"step size underflow at t={t:.6g} (h={hh:.3g})")
        if stiff:
            y_new, err = _ros3(rhs, jac, y, hh, fy)
        else:
            y_new, err, k7 = _dopri(rhs, y, hh, fy)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        en = float(np.max(np.abs(err) / sc))
        if not math.isfinite(en):
            en = 1e10
        order = 3.0 if stiff else 5.0
        if en <= 1.0:
            steps += 1
            t = target if hit else t + hh
            y = y_new
            fy = k7 if not stiff else rhs(y)
            if t_eval is None:
                out_t.append(t)
                out_y.append(y.copy())
            elif hit:
                out_t.append(t)
                out_y.append(y.copy())
                next_out += 1
            if stiff:
                fac = 0.9 * max(en, 1e-10) ** (-1.0 / order)
            else:
                # PI control with fixed gains
                fac = 0.9 * max(en, 1e-10) ** (-0.17) * err_prev ** 0.04
            err_prev = max(en, 1e-4)
            h_next = hh * min(5.0, max(0.2, fac))
            if not hit or hh >= h:
                h = h_next
            if method == "auto" and not stiff:
                small_run = small_run + 1 if hh < COLLAPSE_FRAC * span and not hit else 0
                # stage differences lose the fast mode once it sits at roundoff,
                # so the stiffness estimate uses the Jacobian spectrum instead
                hrho = hh * float(np.max(np.abs(np.linalg.eigvals(jac(y)))))
                stiff_run = stiff_run + 1 if hrho > STIFF_HRHO else 0
                if small_run >= COLLAPSE_STEPS or stiff_run >= STIFF_STEPS:
                    stiff = True
                    switched_at = t
        else:
            rejected += 1
            h = hh * max(0.2, 0.9 * en ** (-1.0 / order))
            if h < UNDERFLOW_FRAC * span:
                raise IntegrationError(f"step size underflow at t={t:.6g} (h={h:.3g})")

    info = {"rtol": rtol, "atol": atol, "method": method, "steps": steps,
            "rejected": rejected, "switched_at": switched_at}
    info.update(meta or {})
    return Trajectory(np.array(out_t), np.array(out_y), names, info)


# ------------------------------------------------------------------ comparison

def reduced_for(sc: Scenario) -> ReducedModel | None:
    if sc.reduced:
        return closed_form_reduction(sc.reduced, sc.field.states)
    return None


def loglog_slope(eps: Sequence[float], err: Sequence[float]) -> float:
    """Least-squares slope of log(err) against log(eps)."""
    e = np.log(np.asarray(eps, dtype=float))
    r = np.asarray(err, dtype=float)
    if len(e) < 2 or np.any(r <= 0):
        return float("nan")
    A = np.vstack([e, np.ones_like(e)]).T
    return float(np.linalg.lstsq(A, np.log(r), rcond=None)[0][0])


def _output_grid(T: float, n_uniform: int = 2001, n_log: int = 200) -> np.ndarray:
    g = np.union1d(np.linspace(0.0, T, n_uniform), np.geomspace(T * 1e-8, T, n_log))
    g[-1] = T
    return g


def horizon_for(rm: ReducedModel, point: Mapping[str, float], observed: str,
                rtol: float = 1e-9, T0: float | None = None, max_doublings: int = 60) -> float:
    """Smallest doubling of T0 after which the reduced observed coordinate is below 1e-3 of its start."""
    f, jac = rm.system(point)
    x0 = rm.initial(point)
    k = rm.states.index(observed)
    start = abs(x0[k])
    if start == 0:
        raise ScenarioError("observed coordinate starts at zero; give a fixed horizon")
    if T0 is None:
        rate = abs(f(x0)[k]) / start
        T0 = 1.0 / rate if rate > 0 else 1.0
    T = T0
    for _ in range(max_doublings):
        tr = integrate(f, jac, x0, (0.0, T), rtol=max(rtol, 1e-8), method="auto")
        if abs(tr.y[-1, k]) < HORIZON_DROP * start:
            return T
        T *= 2.0
    raise ScenarioError(f"reduced model does not decay within T={T:.3g}")


def transient_onset(sc: Scenario, traj: Trajectory, point_vec, eps_star: float) -> tuple[float, bool]:
    """First output time at which the full state looks slow.

    At the chart projection of the state the right-hand side is split by the
    kernel/image projector; the onset is the first time the image part is
    at most ``2 * eps_star`` times the kernel part.  Returns ``(t_c, found)``.
    """
    slow = list(sc.slow_index)
    for ti, x in zip(traj.t, traj.y):
        xbar = sc.embed(x[slow][None, :], check=False)[0]
        try:
            P = spectral_projector(sc.field.jacobian(xbar, sc.pi_hat_vec), sc.s).matrix
        except ProjectorError:
            continue
        v = sc.field.evaluate(x, point_vec)
        a = np.max(np.abs(P @ v))
        b = np.max(np.abs(v - P @ v))
        if a > 0 and b <= 2.0 * eps_star * a:
            return float(ti), True
    return 0.0, False


@dataclass
class ComparisonRow:
    eps: float
    eps_star: float
    mu_star: float | None
    t_c: float
    t_c_found: bool
    err_post: float
    err_full: float
    err_l2: float
    T: float
    slope: float = float("nan")

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ComparisonReport:
    scenario: str
    observed: str
    rows: list[ComparisonRow]
    slope: float
    catalog: dict = field(default_factory=dict)

    HEADER = "eps,eps_star,mu_star,t_c,err_post,err_full,slope"

    def to_csv(self, target=None) -> str:
        lines = [self.HEADER]
        for r in self.rows:
            lines.append(",".join(fmt(v) for v in (r.eps, r.eps_star, r.mu_star, r.t_c,
                                                    r.err_post, r.err_full, self.slope)))
        text = "\n".join(lines) + "\n"
        if target is not None:
            with open(target, "w") as fh:
                fh.write(text)
        return text

    def as_dict(self) -> dict:
        return {"scenario": self.scenario, "observed": self.observed, "slope": self.slope,
                "rows": [r.as_dict() for r in self.rows], "catalog": self.catalog}

    @property
    def errors(self) -> list[float]:
        return [r.err_post for r in self.rows]

    def monotone(self) -> bool:
        e = self.errors
        return all(b < a for a, b in zip(e, e[1:]))


_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def _compare_one(sc: Scenario, rm: ReducedModel | None, eps: float, observed: str,
                 rtol: float, horizon: float | None, grid: int) -> ComparisonRow:
    point = sc.point_dict(eps)
    point_all = dict(point, **sc.extras)
    pvec = sc.point(eps)
    f, jac = sc.field.system(pvec)
    x0 = sc.field.initial_state(pvec)
    try:
        if rm is not None:
            rf, rjac = rm.system(point_all)
            r0 = rm.initial(point_all)
            k = rm.states.index(observed)
            T = horizon if horizon is not None else horizon_for(rm, point_all, observed, rtol)
        else:
            rf0 = numeric_reduced_model(sc)
            rf = lambda u: eps * rf0(u)  # noqa: E731
            rjac = None
            r0 = x0[list(sc.slow_index)]
            k = list(sc.chart.slow).index(observed)
            if horizon is None:
                raise ScenarioError("numeric reductions need a fixed horizon")
            T = horizon
        grid_t = _output_grid(T)
        full = integrate(f, jac, x0, (0.0, T), rtol=rtol, t_eval=grid_t, names=sc.field.states)
        red = integrate(rf, rjac, r0, (0.0, T), rtol=rtol, t_eval=grid_t,
                        method="auto" if rjac is not None else "explicit")
    except (IntegrationError, ScenarioError) as exc:
        raise IntegrationError(f"eps={eps:g}: {exc}") from exc
    obs_full = rm.lift(full.y)[:, k] if rm is not None else full.y[:, sc.slow_index[k]]
    obs_red = red.y[:, k]
    scale = abs(obs_full[0]) or float(np.max(np.abs(obs_full))) or 1.0
    diff = np.abs(obs_full - obs_red) / scale
    es = eps_star_generic(sc, grid, eps).hi
    mu = mu_star_generic(sc, grid, eps)[0].hi if sc.s == 1 else None
    t_c, found = transient_onset(sc, full, pvec, es)
    post = diff[full.t >= t_c]
    l2 = math.sqrt(float(_trapezoid(diff ** 2, full.t)) / T)
    return ComparisonRow(float(eps), es, mu, t_c, found, float(post.max()), float(diff.max()), l2, T)


_JOB: dict = {}


def _job(i):
    j = _JOB
    return _compare_one(j["sc"], j["rm"], j["eps"][i], j["observed"], j["rtol"], j["horizon"], j["grid"])


def compare(sc: Scenario, eps: Sequence[float] | None = None, rtol: float = 1e-9,
            reduced: ReducedModel | None = None, observed: str | None = None,
            horizon: float | None = None, grid: int = 101, jobs: int = 1,
            slope_points: int = 3) -> ComparisonReport:
    """Integrate full and reduced systems along the eps schedule.

    Rows come out sorted by eps descending whatever ``jobs`` is; the slope is
    fitted over the ``slope_points`` smallest eps values.
    """
    eps = sorted((float(e) for e in (eps if eps is not None else sc.eps_schedule)), reverse=True)
    rm = reduced if reduced is not None else reduced_for(sc)
    observed = observed or sc.observed_state
    horizon = horizon if horizon is not None else sc.horizon
    if jobs > 1 and len(eps) > 1 and "fork" in multiprocessing.get_all_start_methods():
        _JOB.update(sc=sc, rm=rm, eps=eps, observed=observed, rtol=rtol, horizon=horizon, grid=grid)
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
            rows = list(pool.map(_job, range(len(eps))))
        _JOB.clear()
    else:
        rows = [_compare_one(sc, rm, e, observed, rtol, horizon, grid) for e in eps]
    tail = rows[-slope_points:]
    slope = loglog_slope([r.eps for r in tail], [r.err_post for r in tail])
    for r in rows:
        r.slope = slope
    cat = {}
    return ComparisonReport(sc.name, observed, rows, slope, cat)


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("TFPV_LAB_JOBS", "1")))
    except ValueError:
        return 1


# ------------------------------------------------------------------ cascade

@dataclass
class CascadeReport:
    full: Trajectory
    stage1: Trajectory
    stage2: Trajectory
    c2_tilde: float
    slow_window: tuple[float, float]
    very_slow_window: tuple[float, float]
    err_c2_slow: float
    err_s_very_slow: float
    err_c2_very_slow: float
    tol: float = 0.05

    @property
    def stage1_tracks(self) -> bool:
        return self.err_c2_slow < self.tol

    @property
    def stage2_tracks(self) -> bool:
        return self.err_s_very_slow < self.tol

    def as_dict(self) -> dict:
        return {"c2_tilde": self.c2_tilde, "slow_window": list(self.slow_window),
                "very_slow_window": list(self.very_slow_window),
                "err_c2_slow": self.err_c2_slow, "err_s_very_slow": self.err_s_very_slow,
                "err_c2_very_slow": self.err_c2_very_slow,
                "stage1_tracks": self.stage1_tracks, "stage2_tracks": self.stage2_tracks}


def three_timescale_run(cm: CascadeModel, sc: Scenario, rtol: float = 1e-9,
                        x0=None, horizon: float | None = None) -> CascadeReport:
    """Full competitive system against both cascade stages.

    Windows follow the timescales: the slow window runs from ten fast times
    to ten slow times, the very slow window from there to the horizon.
    Errors are normalized by c2_tilde (for c2) and s0 (for s).
    """
    p = cm.point
    pvec = sc.field.param_vector({k: v for k, v in p.items() if k in sc.field.params})
    f, jac = sc.field.system(pvec)
    if x0 is None:
        x0 = sc.field.initial_state(pvec)
    x0 = np.asarray(x0, dtype=float)
    iS, iC2 = sc.field.states.index("S"), sc.field.states.index("C2")
    s0 = x0[iS]
    tau_fast = 1.0 / (p["km1"] + p["k2"])
    tau_slow = 1.0 / cm.slow_rate
    if horizon is None:
        horizon = 7.0 / cm.very_slow_rate if cm.very_slow_rate > 0 else 20.0 * tau_slow
    T = max(horizon, 20.0 * tau_slow)
    grid_t = np.union1d(np.geomspace(tau_fast * 1e-3, T, 800), np.linspace(0, T, 2001))
    full = integrate(f, jac, x0, (0.0, T), rtol=rtol, t_eval=grid_t, names=sc.field.states)

    f1, j1 = cm.stage1.system(p)
    st1 = integrate(f1, j1, np.array([s0, x0[iC2]]), (0.0, T), rtol=rtol, t_eval=grid_t,
                    names=cm.stage1.states)
    f2, j2 = cm.stage2.system(cm.stage2_point())
    st2 = integrate(f2, j2, np.array([s0]), (0.0, T), rtol=rtol, t_eval=grid_t,
                    names=cm.stage2.states)

    slow = (10.0 * tau_fast, 10.0 * tau_slow)
    very = (10.0 * tau_slow, T)
    m1 = (grid_t >= slow[0]) & (grid_t <= slow[1])
    m2 = grid_t >= very[0]
    c2t = cm.c2_tilde
    scale_c = c2t if c2t > 0 else 1.0
    err_c2_slow = float(np.max(np.abs(full.y[m1, iC2] - st1["C2"][m1]))) / scale_c if m1.any() else 0.0
    err_s = float(np.max(np.abs(full.y[m2, iS] - st2["S"][m2])) / (s0 or 1.0))
    err_c2v = float(np.max(np.abs(full.y[m2, iC2] - c2t))) / scale_c
    return CascadeReport(full, st1, st2, c2t, slow, very, err_c2_slow, err_s, err_c2v)
