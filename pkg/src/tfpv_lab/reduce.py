"""Slow reduced vector fields.

Numerically, the first-order ray term h1 = D_2 h(x, pi_hat) rho is projected
onto ker D_1 h(x, pi_hat) along its image.  The closed-form reduced models of
the catalog mechanisms are kept as expression strings and compiled on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Mapping, Sequence

import numpy as np
import sympy as sp

from .scenario import Scenario, ScenarioError, parse_expression

__all__ = [
    "ProjectorError",
    "Projector",
    "ReducedModel",
    "CascadeModel",
    "spectral_projector",
    "reduce_numeric",
    "chart_derivative",
    "tangency_residual",
    "closed_form_reduction",
    "reduced_model_ids",
    "cascade_reduction",
    "c2_tilde",
    "REDUCED_MODELS",
    "SCENARIO_REDUCTIONS",
]


class ProjectorError(ValueError):
    pass


@dataclass(frozen=True)
class Projector:
    matrix: np.ndarray
    rank: int
    kernel: np.ndarray
    image: np.ndarray
    condition: float

    def __matmul__(self, v):
        return self.matrix @ v


def spectral_projector(J, s: int, rank_tol: float = 1e-6, cond_max: float = 1e12) -> Projector:
    """Projection onto ker J along im J, for a J with an s-dimensional kernel."""
    J = np.asarray(J, dtype=float)
    n = J.shape[0]
    if J.shape != (n, n):
        raise ProjectorError(f"expected a square matrix, got {J.shape}")
    if not 0 < s <= n:
        raise ProjectorError(f"kernel dimension {s} out of range for n={n}")
    U, sv, Vt = np.linalg.svd(J)
    top = sv[0]
    r = n - s
    if r > 0 and (top == 0 or sv[r - 1] < rank_tol * top):
        raise ProjectorError(f"rank of J is below {r} (singular values {sv})")
    if r < n and sv[r] >= rank_tol * max(top, 1e-300) and top > 0:
        raise ProjectorError(f"rank of J exceeds {r} (singular values {sv})")
    K = Vt[r:].T
    M = U[:, :r]
    B = np.hstack([K, M])
    cond = float(np.linalg.cond(B))
    if not math.isfinite(cond) or cond > cond_max:
        raise ProjectorError(f"kernel and image are not transversal (condition number {cond:.3g})")
    D = np.zeros((n, n))
    D[:s, :s] = np.eye(s)
    P = B @ D @ np.linalg.inv(B)
    return Projector(P, s, K, M, cond)


def reduce_numeric(sc: Scenario, x, rank_tol: float = 1e-6) -> np.ndarray:
    """Pi(x) h1(x) at a manifold point (or a stack of points)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        P = spectral_projector(sc.field.jacobian(x, sc.pi_hat_vec), sc.s, rank_tol)
        return P.matrix @ sc.h1(x)
    return np.stack([reduce_numeric(sc, xi, rank_tol) for xi in x])


@lru_cache(maxsize=None)
def _chart_derivative_fn(sc: Scenario):
    names = list(sc.field.states) + list(sc.field.params)
    graph = dict(sc.chart.graph)
    slow_syms = [sp.Symbol(u) for u in sc.chart.slow]
    rows = []
    for x in sc.field.states:
        if x in sc.chart.slow:
            rows.append([sp.Integer(1 if x == u else 0) for u in sc.chart.slow])
        else:
            e = parse_expression(graph[x], names)
            rows.append([sp.diff(e, u) for u in slow_syms])
    args = slow_syms + list(sc.field.param_symbols)
    return sp.lambdify(args, [c for row in rows for c in row], modules="math")


def chart_derivative(sc: Scenario, u) -> np.ndarray:
    """Derivative of the chart map u -> x, shape (n, s)."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    vals = _chart_derivative_fn(sc)(*u, *sc.pi_hat_vec)
    return np.array(vals, dtype=float).reshape(sc.n, sc.s)


def tangency_residual(sc: Scenario, u) -> float:
    """|| fast part of Pi h1 - Dphi(u) * slow part || at chart coordinates u."""
    x = sc.embed(np.atleast_2d(u))[0]
    v = reduce_numeric(sc, x)
    D = chart_derivative(sc, u)
    slow = v[list(sc.slow_index)]
    return float(np.max(np.abs(D @ slow - v)))


# ------------------------------------------------------------------ closed forms

@dataclass(frozen=True)
class _Spec:
    states: tuple[str, ...]
    rhs: tuple[str, ...]
    lift: tuple[str, ...]          # reduced coordinate as an expression in full states
    init: tuple[str, ...]


REDUCED_MODELS: dict[str, _Spec] = {
    "mm.irrev.e0": _Spec(("S",), ("-k1*k2*e0*S/(k1*S + km1 + k2)",), ("S",), ("s0",)),
    "mm.rev.e0": _Spec(
        ("S",),
        ("-e0*(S*(k1*k2 + km1*km2) - km1*km2*s0)/(k1*S + km1 + k2 + km2*(s0 - S))",),
        ("S",), ("s0",)),
    "mm.slowprod.k2": _Spec(
        ("S",), ("-k2*e0*S*(S + km1/k1)/((km1/k1)*e0 + (S + km1/k1)**2)",), ("S",), ("s0",)),
    "mm.slowprod.k2.x": _Spec(
        ("X",), ("-k2/2*((km1/k1 + e0 + X) - sqrt((km1/k1 + e0 - X)**2 + 4*(km1/k1)*X))",),
        ("S + C",), ("s0",)),
    "coop.e0": _Spec(
        ("S",),
        ("-k1*e0*S*(k3*k4*S + k2*(km3 + k4))/((k1*S + km1 + k2)*(km3 + k4) + k1*k3*S**2)",),
        ("S",), ("s0",)),
    "uncomp.e0": _Spec(
        ("S",), ("-k1*e0*k2*km3*S/((k1*S + k2 + km1)*km3 + i0*k1*k3*S)",), ("S",), ("s0",)),
    "uncomp.k1km3": _Spec(
        ("S", "C2"),
        ("(-k1*(e0 - C2)*(k2 + k3*(i0 - C2))*S + km3*km1*C2)/(km1 + k2 + k3*(i0 - C2))",
         "(k1*k3*(e0 - C2)*(i0 - C2)*S - km3*(km1 + k2)*C2)/(km1 + k2 + k3*(i0 - C2))"),
        ("S", "C2"), ("s0", "0")),
    "comp.e0": _Spec(
        ("S",), ("-k1*km3*k2*e0*S/((k1*S + km1 + k2)*km3 + k3*i0*(km1 + k2))",), ("S",), ("s0",)),
    "comp.k1k3km3": _Spec(
        ("S", "C2"),
        ("-k1*k2/(km1 + k2)*(e0 - C2)*S", "k3*(e0 - C2)*(i0 - C2) - km3*C2"),
        ("S", "C2"), ("s0", "0")),
    "comp.cascade.stage1": _Spec(
        ("S", "C2"), ("0", "k3*(e0 - C2)*(i0 - C2) - km3*C2"), ("S", "C2"), ("s0", "0")),
    "comp.cascade": _Spec(
        ("S",), ("-k2*k1*(e0 - c2t)/(km2 + km1)*S",), ("S",), ("s0",)),
}

# (fixture, scenario) -> reduced model id checked against the numeric projector
SCENARIO_REDUCTIONS = {
    ("mm.irrev", "e0"): "mm.irrev.e0",
    ("mm.rev", "e0"): "mm.rev.e0",
    ("mm.slowprod", "k2"): "mm.slowprod.k2",
    ("coop", "e0"): "coop.e0",
    ("uncomp", "e0"): "uncomp.e0",
    ("uncomp", "k1km3"): "uncomp.k1km3",
    ("comp", "e0"): "comp.e0",
    ("comp", "k1k3km3"): "comp.k1k3km3",
}


def reduced_model_ids() -> list[str]:
    return sorted(REDUCED_MODELS)


@dataclass(frozen=True, eq=False)
class ReducedModel:
    id: str
    states: tuple[str, ...]
    rhs_text: tuple[str, ...]
    lift_text: tuple[str, ...]
    init_text: tuple[str, ...]
    full_states: tuple[str, ...]

    @cached_property
    def _symbols(self):
        names = set()
        for t in self.rhs_text + self.init_text:
            names |= {str(s) for s in sp.sympify(t, locals=_plain(t)).free_symbols}
        return tuple(sorted(names - set(self.states)))

    @property
    def params(self) -> tuple[str, ...]:
        return self._symbols

    @cached_property
    def _compiled(self):
        names = list(self.states) + list(self.params)
        exprs = [parse_expression(t, names) for t in self.rhs_text]
        xs = [sp.Symbol(s) for s in self.states]
        ps = [sp.Symbol(p) for p in self.params]
        jac = sp.Matrix(exprs).jacobian(xs)
        f = sp.lambdify(xs + ps, exprs, modules="math")
        j = sp.lambdify(xs + ps, list(jac), modules="math")
        init = sp.lambdify(ps, [parse_expression(t, names) for t in self.init_text], modules="math")
        full_names = list(self.full_states)
        lift = sp.lambdify([sp.Symbol(s) for s in full_names],
                           [parse_expression(t, full_names) for t in self.lift_text],
                           modules="numpy")
        return f, j, init, lift

    def _pvals(self, point: Mapping[str, float]) -> list[float]:
        missing = [p for p in self.params if p not in point]
        if missing:
            raise ScenarioError(f"reduced model {self.id} needs parameters {missing}")
        return [float(point[p]) for p in self.params]

    def system(self, point: Mapping[str, float]):
        f_fn, j_fn, _, _ = self._compiled
        pv = self._pvals(point)
        m = len(self.states)

        def f(x):
            return np.array(f_fn(*x, *pv), dtype=float)

        def jac(x):
            return np.array(j_fn(*x, *pv), dtype=float).reshape(m, m)

        return f, jac

    def rhs(self, x, point: Mapping[str, float]) -> np.ndarray:
        return self.system(point)[0](np.asarray(x, dtype=float))

    def initial(self, point: Mapping[str, float]) -> np.ndarray:
        return np.array(self._compiled[2](*self._pvals(point)), dtype=float)

    def lift(self, X) -> np.ndarray:
        """Reduced coordinates of full states X, shape (..., n) -> (..., m)."""
        X = np.asarray(X, dtype=float)
        vals = self._compiled[3](*[X[..., i] for i in range(X.shape[-1])])
        return np.stack([np.broadcast_to(v, X.shape[:-1]) for v in vals], axis=-1)


def _plain(text: str) -> dict:
    import re
    return {nm: sp.Symbol(nm) for nm in re.findall(r"[A-Za-z_][A-Za-z0-9_]*", text)
            if nm not in ("sqrt",)}


def closed_form_reduction(model_id: str, full_states: Sequence[str] | None = None) -> ReducedModel:
    """Reduced model by catalog id (see ``reduced_model_ids``)."""
    try:
        spec = REDUCED_MODELS[model_id]
    except KeyError:
        raise ScenarioError(f"unknown reduced model {model_id!r}; "
                            f"known: {', '.join(reduced_model_ids())}") from None
    if full_states is None:
        full_states = _default_full_states(model_id)
    return ReducedModel(model_id, spec.states, spec.rhs, spec.lift, spec.init, tuple(full_states))


def _default_full_states(model_id: str) -> tuple[str, ...]:
    if model_id.startswith("mm."):
        return ("S", "C")
    return ("S", "C1", "C2")


def numeric_reduced_model(sc: Scenario):
    """Reduced flow in chart coordinates from the numeric projector: (f, None)."""
    def f(u):
        x = sc.embed(np.atleast_2d(u), check=False)[0]
        v = reduce_numeric(sc, x)
        return v[list(sc.slow_index)]
    return f


# ------------------------------------------------------------------ cascade

def c2_tilde(k3: float, km3: float, e0: float, i0: float) -> float:
    """Root of k3 (e0 - c)(i0 - c) - km3 c in [0, min(e0, i0)], cancellation free."""
    b = k3 * (e0 + i0) + km3
    # b^2 - 4 k3^2 e0 i0 expanded so that no negative terms can cancel
    disc = (k3 * (e0 - i0)) ** 2 + 2.0 * k3 * km3 * (e0 + i0) + km3 * km3
    den = b + math.sqrt(disc)
    if den == 0:
        return 0.0
    return 2.0 * e0 * i0 * k3 / den


@dataclass(frozen=True, eq=False)
class CascadeModel:
    point: dict[str, float]
    c2_tilde: float
    stage1: ReducedModel
    stage2: ReducedModel
    slow_rate: float           # |d/dc2| of the stage-1 equation at c2_tilde
    very_slow_rate: float      # decay rate of s in stage 2
    timescales: tuple[str, str] = ("tau1 = eps1*t", "tau2 = eps1*eps2*t")

    def stage2_point(self) -> dict[str, float]:
        p = dict(self.point)
        p["c2t"] = self.c2_tilde
        return p

    def residual(self) -> float:
        p, c = self.point, self.c2_tilde
        return p["k3"] * (p["e0"] - c) * (p["i0"] - c) - p["km3"] * c


def cascade_reduction(point: Mapping[str, float]) -> CascadeModel:
    """Two-stage reduction of competitive inhibition.

    The stage-2 equation carries a separate ``km2`` in its denominator, so
    the point must supply that alias explicitly.
    """
    p = {k: float(v) for k, v in point.items()}
    needed = ["k1", "km1", "k2", "k3", "km3", "e0", "i0", "km2"]
    missing = [k for k in needed if k not in p]
    if missing:
        raise ScenarioError(f"cascade reduction needs parameters {missing}"
                            + (" (km2 is the alias used in the very slow equation)"
                               if "km2" in missing else ""))
    c = c2_tilde(p["k3"], p["km3"], p["e0"], p["i0"])
    slow = p["k3"] * (p["e0"] + p["i0"] - 2 * c) + p["km3"]
    very = p["k2"] * p["k1"] * (p["e0"] - c) / (p["km2"] + p["km1"])
    return CascadeModel(p, c, closed_form_reduction("comp.cascade.stage1"),
                        closed_form_reduction("comp.cascade"), abs(slow), very)
