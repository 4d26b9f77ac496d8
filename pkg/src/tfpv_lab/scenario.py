"""TFPV scenarios: critical-manifold charts, verification, sigma expansions.

A scenario fixes a parameter point ``pi_hat`` at which the system has an
s-dimensional manifold of equilibria, and a ray direction ``rho``; the
perturbed system lives at ``pi_hat + eps * rho``.  The manifold is described
by a user chart: some state variables are slow coordinates, the others are
given as expressions in them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property, lru_cache
from itertools import combinations
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import parse_expr

from .netmodel import NetworkError, PolyVectorField, eliminate_conservation, parse_network
from .spectral import eigenvalues, hurwitz_stable, roots_from_sigma, sigma_noise_scale

__all__ = [
    "ScenarioError",
    "ManifoldChart",
    "Scenario",
    "SigmaExpansion",
    "VerificationReport",
    "EigenOrderReport",
    "parse_expression",
    "load_scenario",
    "scenario_from_dict",
    "sigma_functions",
    "expansion_coefficients",
    "sigma_expansion",
    "verify_tfpv",
    "eigenvalue_order_check",
    "DEFAULT_SCHEDULE",
]

DEFAULT_SCHEDULE = (1.0, 1e-1, 1e-2, 1e-3)
GRID_CAP = 10**6

ZERO_RTOL = 1e-9        # sigma_k(x, pi_hat) = 0 test, relative to its noise scale
ORDER_RTOL = 1e-10      # vanishing-order detection
NONDEGEN_RTOL = 1e-8    # sigma_hat bounded away from zero
RANK_RTOL = 1e-6        # singular-value gap
CHART_RTOL = 1e-9
NEWTON_RTOL = 1e-12

DATA_DIR = Path(__file__).resolve().parent / "data"


class ScenarioError(ValueError):
    pass


def parse_expression(text: str | float, names: Sequence[str]) -> sp.Expr:
    """Parse ``text`` with every name in ``names`` bound to a plain symbol.

    Binding explicitly keeps names like ``S``, ``E`` or ``I`` from resolving to
    sympy builtins.
    """
    if isinstance(text, (int, float)):
        return sp.Float(text) if isinstance(text, float) else sp.Integer(text)
    local = {nm: sp.Symbol(nm) for nm in names}
    try:
        expr = parse_expr(str(text), local_dict=local)
    except Exception as exc:  # sympy raises a zoo of exception types here
        raise ScenarioError(f"cannot parse expression {text!r}: {exc}") from exc
    unknown = {str(s) for s in expr.free_symbols} - set(names)
    if unknown:
        raise ScenarioError(f"expression {text!r} uses unknown names {sorted(unknown)}")
    return expr


@dataclass(frozen=True)
class ManifoldChart:
    """Slow coordinates plus graph expressions for the remaining states."""

    slow: tuple[str, ...]
    graph: tuple[tuple[str, str], ...]
    kind: str = "graph"

    @classmethod
    def build(cls, field: PolyVectorField, slow: Sequence[str],
              graph: Mapping[str, str | float]) -> "ManifoldChart":
        slow = tuple(slow)
        for name in slow:
            if name not in field.states:
                raise ScenarioError(f"slow coordinate {name!r} is not a state")
        missing = [x for x in field.states if x not in slow and x not in graph]
        extra = [x for x in graph if x not in field.states or x in slow]
        if missing or extra:
            raise ScenarioError(f"chart graph must cover exactly the non-slow states; "
                                f"missing {missing}, unexpected {extra}")
        names = list(field.states) + list(field.params)
        state_syms = set(field.state_symbols)
        kind = "subspace"
        for expr in graph.values():
            e = parse_expression(expr, names)
            if e.free_symbols & state_syms:
                kind = "graph"
        ordered = tuple((x, str(graph[x])) for x in field.states if x in graph)
        return cls(slow, ordered, kind)

    def as_dict(self) -> dict:
        return {"slow": list(self.slow), "graph": dict(self.graph), "kind": self.kind}


@lru_cache(maxsize=None)
def sigma_functions(field: PolyVectorField):
    """Compiled sigma_1..sigma_n of the Jacobian as expanded polynomials in (x, params).

    Expanding symbolically cancels terms exactly, so on the critical manifold
    the surviving terms all carry a ray parameter.
    """
    Jm = field.jacobian_exprs
    n = field.n
    exprs = []
    for k in range(1, n + 1):
        total = sp.Integer(0)
        for idx in combinations(range(n), k):
            total += Jm.extract(list(idx), list(idx)).det(method="berkowitz")
        exprs.append(sp.expand((-1) ** k * total))
    args = list(field.state_symbols) + list(field.param_symbols)
    fn = sp.lambdify(args, exprs, modules="numpy", cse=True)

    def sigma(x, p):
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        shape = np.broadcast_shapes(x.shape[:-1], p.shape[:-1])
        vals = fn(*[x[..., i] for i in range(n)], *[p[..., j] for j in range(p.shape[-1])])
        out = np.empty(shape + (n,))
        for i, v in enumerate(vals):
            out[..., i] = v
        return out

    return sigma


@dataclass(frozen=True, eq=False)
class Scenario:
    field: PolyVectorField
    pi_hat: Mapping[str, float]
    rho: Mapping[str, float]
    s: int
    chart: ManifoldChart
    box: tuple[tuple[str, float, float], ...]
    eps_schedule: tuple[float, ...] = DEFAULT_SCHEDULE
    eps_max_value: float | None = None
    name: str = ""
    observed: str | None = None
    horizon: float | None = None
    reduced: str | None = None
    extras: Mapping[str, float] = dc_field(default_factory=dict)

    def __post_init__(self):
        n = self.field.n
        if not 1 <= self.s < n:
            raise ScenarioError(f"manifold dimension s={self.s} must satisfy 1 <= s < n={n}")
        if len(self.chart.slow) != self.s:
            raise ScenarioError(f"chart has {len(self.chart.slow)} slow coordinates, s={self.s}")
        for key in list(self.pi_hat) + list(self.rho):
            if key not in self.field.params:
                raise ScenarioError(f"unknown parameter {key!r}")
        for p in self.field.params:
            if p not in self.pi_hat and p not in self.rho:
                raise ScenarioError(f"parameter {p!r} missing from pi_hat")
        if [b[0] for b in self.box] != list(self.chart.slow):
            raise ScenarioError("box must list the slow coordinates in chart order")
        for name, lo, hi in self.box:
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ScenarioError(f"empty or invalid box interval for {name}: [{lo}, {hi}]")
        if not self.eps_schedule:
            raise ScenarioError("empty eps schedule")
        for eps in self.eps_schedule:
            if eps <= 0:
                raise ScenarioError(f"eps values must be positive, got {eps}")
            if np.any(self.point(eps) < 0):
                raise ScenarioError(f"pi_hat + eps*rho has negative entries at eps={eps}")
        if self.observed is not None and self.observed not in self.field.states:
            raise ScenarioError(f"observed coordinate {self.observed!r} is not a state")

    # -- parameter points ---------------------------------------------------

    @cached_property
    def pi_hat_vec(self) -> np.ndarray:
        return np.array([float(self.pi_hat.get(p, 0.0)) for p in self.field.params])

    @cached_property
    def rho_vec(self) -> np.ndarray:
        return np.array([float(self.rho.get(p, 0.0)) for p in self.field.params])

    @property
    def n(self) -> int:
        return self.field.n

    @property
    def eps_max(self) -> float:
        return self.eps_max_value if self.eps_max_value is not None else max(self.eps_schedule)

    @property
    def ray_params(self) -> tuple[str, ...]:
        return tuple(p for p in self.field.params if self.rho.get(p, 0.0) != 0.0)

    @property
    def observed_state(self) -> str:
        return self.observed or self.chart.slow[0]

    def point(self, eps: float) -> np.ndarray:
        return self.pi_hat_vec + eps * self.rho_vec

    def point_dict(self, eps: float) -> dict[str, float]:
        return {p: float(v) for p, v in zip(self.field.params, self.point(eps))}

    def with_schedule(self, eps: Sequence[float]) -> "Scenario":
        return Scenario(self.field, self.pi_hat, self.rho, self.s, self.chart, self.box,
                        tuple(float(e) for e in eps), self.eps_max_value, self.name,
                        self.observed, self.horizon, self.reduced, self.extras)

    def with_box(self, box: Mapping[str, tuple[float, float]]) -> "Scenario":
        new = tuple((nm, float(box[nm][0]), float(box[nm][1])) if nm in box else (nm, lo, hi)
                    for nm, lo, hi in self.box)
        return Scenario(self.field, self.pi_hat, self.rho, self.s, self.chart, new,
                        self.eps_schedule, self.eps_max_value, self.name, self.observed,
                        self.horizon, self.reduced, self.extras)

    # -- chart ----------------------------------------------------------------

    @cached_property
    def _chart_fn(self):
        names = list(self.field.states) + list(self.field.params)
        graph = dict(self.chart.graph)
        exprs = []
        for x in self.field.states:
            if x in self.chart.slow:
                exprs.append(sp.Symbol(x))
            else:
                exprs.append(parse_expression(graph[x], names))
        args = [sp.Symbol(u) for u in self.chart.slow] + list(self.field.param_symbols)
        return sp.lambdify(args, exprs, modules="numpy")

    @cached_property
    def slow_index(self) -> tuple[int, ...]:
        return tuple(self.field.states.index(u) for u in self.chart.slow)

    @cached_property
    def fast_index(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if i not in self.slow_index)

    def chart_raw(self, u) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        p = self.pi_hat_vec
        vals = self._chart_fn(*[u[:, j] for j in range(self.s)], *p)
        out = np.empty((u.shape[0], self.n))
        for i, v in enumerate(vals):
            out[:, i] = v
        return out

    def chart_scale(self, x) -> np.ndarray:
        J = self.field.jacobian(x, self.pi_hat_vec)
        jn = np.abs(J).sum(axis=-1).max(axis=-1)
        return np.maximum(1.0, jn) * np.maximum(1.0, np.abs(x).max(axis=-1))

    def embed(self, u, refine: bool = True, check: bool = True) -> np.ndarray:
        """Manifold points for slow coordinates ``u`` (shape (N, s) or (s,)).

        Graph charts are polished by Gauss-Newton on the non-slow coordinates;
        a residual above tolerance raises ScenarioError naming the point.
        """
        u = np.atleast_2d(np.asarray(u, dtype=float))
        x = self.chart_raw(u)
        if not np.all(np.isfinite(x)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(x), axis=1))[0])
            raise ScenarioError(f"chart evaluation failed at {self.describe(u[bad])}")
        p = self.pi_hat_vec
        fast = list(self.fast_index)
        if refine and self.chart.kind == "graph" and fast:
            for _ in range(20):
                r = self.field.evaluate(x, p)
                scale = self.chart_scale(x)
                todo = np.linalg.norm(r, axis=-1) > NEWTON_RTOL * scale
                if not np.any(todo):
                    break
                J = self.field.jacobian(x[todo], p)[..., :, fast]
                dx = -np.einsum("...ij,...j->...i", np.linalg.pinv(J), r[todo])
                x[np.ix_(np.flatnonzero(todo), fast)] += dx
        if check:
            r = np.linalg.norm(self.field.evaluate(x, p), axis=-1)
            bad = np.flatnonzero(r > CHART_RTOL * self.chart_scale(x))
            if bad.size:
                i = int(bad[0])
                raise ScenarioError(f"chart point {self.describe(u[i])} is not an equilibrium "
                                    f"at pi_hat (residual {r[i]:.3g})")
        return x

    def grid(self, resolution: int = 101) -> np.ndarray:
        """Uniform per-axis grid on the box, shape (N, s), capped at 10**6 points."""
        per_axis = max(1, min(int(resolution), int(math.floor(GRID_CAP ** (1.0 / self.s) + 1e-9))))
        axes = []
        for _, lo, hi in self.box:
            axes.append(np.array([lo]) if lo == hi else np.linspace(lo, hi, per_axis))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def describe(self, u) -> str:
        u = np.atleast_1d(u)
        return ", ".join(f"{nm}={float(v):.6g}" for nm, v in zip(self.chart.slow, u))

    # -- perturbation -----------------------------------------------------------

    def h1(self, x) -> np.ndarray:
        """First-order term D_2 h(x, pi_hat) rho of the ray expansion."""
        D2 = self.field.param_jacobian(x, self.pi_hat_vec)
        return D2 @ self.rho_vec

    @cached_property
    def degree(self) -> int:
        """Common interpolation degree in eps for all sigma_i."""
        return max(1, self.n * self.field.max_param_degree)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "states": list(self.field.states),
            "pi_hat": {p: float(v) for p, v in zip(self.field.params, self.pi_hat_vec)},
            "rho": {p: float(self.rho[p]) for p in self.ray_params},
            "s": self.s,
            "chart": self.chart.as_dict(),
            "box": {nm: [lo, hi] for nm, lo, hi in self.box},
            "eps": list(self.eps_schedule),
        }


# ------------------------------------------------------------------ loading

def _resolve_network(ref: str, base: Path | None) -> str:
    candidates = []
    if base is not None:
        candidates.append(base / ref)
    candidates.append(Path(ref))
    stem = ref[:-4] if ref.endswith(".crn") else ref
    candidates.append(DATA_DIR / "networks" / f"{stem}.crn")
    for c in candidates:
        if c.is_file():
            return c.read_text()
    raise ScenarioError(f"network {ref!r} not found")


def _param_value(v, names: Sequence[str], env: Mapping[str, float]) -> float:
    if isinstance(v, (int, float)):
        return float(v)
    expr = parse_expression(v, names)
    return float(expr.subs({sp.Symbol(k): val for k, val in env.items()}))


def scenario_from_dict(doc: Mapping, base: Path | None = None,
                       field: PolyVectorField | None = None) -> Scenario:
    """Build a scenario from the JSON schema.

    Either ``pi_hat`` and ``rho`` are given directly, or ``params`` (a full
    parameter point) plus ``ray`` (names); then ``pi_hat`` is ``params`` with
    the ray entries zeroed and ``rho`` carries their values, so eps = 1 is the
    given point.  Box bounds may be numbers or expressions in the parameters,
    evaluated at eps = 1.
    """
    if field is None:
        text = _resolve_network(doc["network"], base)
        try:
            net = parse_network(text)
            field = eliminate_conservation(net, doc.get("eliminate", {}))
        except NetworkError as exc:
            raise ScenarioError(str(exc)) from exc
    params = list(field.params)
    extras = {}
    if "params" in doc:
        full = {}
        for k, v in doc["params"].items():
            (full if k in params else extras)[k] = float(v)
        ray = list(doc.get("ray", []))
        for r in ray:
            if r not in full:
                raise ScenarioError(f"ray parameter {r!r} has no value")
        pi_hat = {k: (0.0 if k in ray else v) for k, v in full.items()}
        rho = {k: full[k] for k in ray}
    else:
        pi_hat = {k: float(v) for k, v in doc["pi_hat"].items()}
        rho = {k: float(v) for k, v in doc.get("rho", {}).items()}
        for k in list(pi_hat):
            if k not in params:
                extras[k] = pi_hat.pop(k)
    extras.update({k: float(v) for k, v in doc.get("extras", {}).items()})
    env = {k: pi_hat.get(k, 0.0) + rho.get(k, 0.0) for k in params}
    env.update(extras)
    chart_doc = doc["chart"]
    chart = ManifoldChart.build(field, chart_doc["slow"], chart_doc.get("graph", {}))
    box = []
    for nm in chart.slow:
        if nm not in doc["box"]:
            raise ScenarioError(f"box has no interval for {nm!r}")
        lo, hi = doc["box"][nm]
        names = params + list(extras)
        box.append((nm, _param_value(lo, names, env), _param_value(hi, names, env)))
    eps = tuple(float(e) for e in doc.get("eps", DEFAULT_SCHEDULE))
    return Scenario(field, pi_hat, rho, int(doc["s"]), chart, tuple(box), eps,
                    doc.get("eps_max"), doc.get("name", ""), doc.get("observed"),
                    doc.get("horizon"), doc.get("reduced"), extras)


def load_scenario(source) -> Scenario:
    """Load a scenario from a JSON path, JSON text or an already parsed mapping."""
    if isinstance(source, Mapping):
        return scenario_from_dict(source)
    path = Path(source)
    try:
        is_file = path.is_file()
    except OSError:             # inline JSON longer than a file name
        is_file = False
    if is_file:
        return scenario_from_dict(json.loads(path.read_text()), base=path.parent)
    try:
        doc = json.loads(str(source))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario {source!r} is neither a file nor JSON") from exc
    return scenario_from_dict(doc)


# ------------------------------------------------------------------ expansions

def _nodes(d: int) -> np.ndarray:
    return np.cos(np.pi * np.arange(d + 1) / d)


def expansion_coefficients(sc: Scenario, X, noise: bool = True) -> tuple[np.ndarray, np.ndarray | None]:
    """Coefficients of eps -> sigma_i(x, pi_hat + eps rho) at each point of X.

    Returns ``(coeffs, noise)`` with coeffs of shape (N, n, d+1), lowest
    order first, and noise (N, n) the largest sigma magnitude scale over the
    interpolation nodes (None when ``noise`` is false).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = sc.degree
    nodes = _nodes(d)
    P = sc.pi_hat_vec[None, :] + nodes[:, None] * sc.rho_vec[None, :]
    sig = sigma_functions(sc.field)(X[:, None, :], P[None, :, :])      # (N, d+1, n)
    scale = None
    if noise:
        J = sc.field.jacobian(X[:, None, :], P[None, :, :])
        scale = sigma_noise_scale(J).max(axis=1)                         # (N, n)
    V = np.vander(nodes, d + 1, increasing=True)
    coeffs = np.linalg.solve(V, sig.transpose(1, 0, 2).reshape(d + 1, -1))
    coeffs = coeffs.reshape(d + 1, X.shape[0], sc.n).transpose(1, 2, 0)
    return coeffs, scale


def expected_orders(n: int, s: int) -> tuple[int, ...]:
    return tuple(max(0, i - n + s) for i in range(1, n + 1))


def _detect_orders(coeffs: np.ndarray, noise: np.ndarray) -> np.ndarray:
    big = np.abs(coeffs) > ORDER_RTOL * noise[..., None]
    first = np.argmax(big, axis=-1)
    return np.where(big.any(axis=-1), first, coeffs.shape[-1])


@dataclass(frozen=True)
class SigmaExpansion:
    x: tuple[float, ...]
    coeffs: tuple[tuple[float, ...], ...]
    orders: tuple[int, ...]
    expected: tuple[int, ...]
    noise: tuple[float, ...]

    def sigma(self, i: int, eps: float) -> float:
        return float(np.polynomial.polynomial.polyval(eps, self.coeffs[i - 1]))

    def sigma_hat(self, i: int, eps: float = 0.0) -> float:
        """sigma_i / eps^(forced order), as a polynomial in eps."""
        c = self.coeffs[i - 1][self.expected[i - 1]:]
        return float(np.polynomial.polynomial.polyval(eps, c))

    @property
    def sigma_hat0(self) -> tuple[float, ...]:
        return tuple(self.coeffs[i][self.expected[i]] for i in range(len(self.coeffs)))


def sigma_expansion(sc: Scenario, x) -> SigmaExpansion:
    x = np.asarray(x, dtype=float)
    coeffs, noise = expansion_coefficients(sc, x[None, :])
    orders = _detect_orders(coeffs, noise)[0]
    return SigmaExpansion(tuple(float(v) for v in x),
                          tuple(tuple(float(c) for c in row) for row in coeffs[0]),
                          tuple(int(o) for o in orders), expected_orders(sc.n, sc.s),
                          tuple(float(v) for v in noise[0]))


# ------------------------------------------------------------------ verification

@dataclass
class VerificationReport:
    scenario: str
    points: int
    checks: dict[str, bool]
    failures: list[str]
    sigma_ranges: dict[str, tuple[float, float]]
    orders: dict[str, int]

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "passed": self.passed,
            "points": self.points,
            "checks": dict(self.checks),
            "failures": list(self.failures),
            "sigma_ranges": {k: list(v) for k, v in self.sigma_ranges.items()},
            "orders": dict(self.orders),
        }


def _fail_lines(sc: Scenario, U, mask, template: str, values=None, limit: int = 3) -> list[str]:
    idx = np.flatnonzero(mask)
    out = []
    for i in idx[:limit]:
        extra = "" if values is None else f" (value {values[i] + 0.0:.3g})"  # no "-0"
        out.append(f"{template} at {sc.describe(U[i])}{extra}")
    if idx.size > limit:
        out.append(f"{template}: {idx.size - limit} more grid points")
    return out


def verify_tfpv(sc: Scenario, grid: int = 101, rank_tol: float = RANK_RTOL) -> VerificationReport:
    """Check the TFPV conditions at every grid point of the box.

    (a) sigma_{n-s+1..n}(x, pi_hat) vanish; (b) chi/tau^s is Hurwitz;
    (c) rank D_1 h = n - s with a clear singular-value gap; (d) the leading
    coefficients sigma_hat_i(x, 0), i > n - s, are nonzero.  The forced
    vanishing orders along the ray are checked as well.
    """
    n, s = sc.n, sc.s
    U = sc.grid(grid)
    X = sc.embed(U)
    p = sc.pi_hat_vec
    J0 = sc.field.jacobian(X, p)
    sig0 = sigma_functions(sc.field)(X, p)
    noise0 = sigma_noise_scale(J0)
    checks: dict[str, bool] = {}
    failures: list[str] = []

    bad = np.zeros(len(U), dtype=bool)
    for k in range(n - s + 1, n + 1):
        mk = np.abs(sig0[:, k - 1]) > ZERO_RTOL * noise0[:, k - 1]
        failures += _fail_lines(sc, U, mk, f"sigma_{k}(x, pi_hat) is not zero", sig0[:, k - 1])
        bad |= mk
    checks["vanishing"] = not bad.any()

    hur = np.array([hurwitz_stable(row[: n - s]) for row in sig0])
    failures += _fail_lines(sc, U, ~hur, f"chi/tau^{s} is not Hurwitz")
    checks["hurwitz"] = bool(hur.all())

    sv = np.linalg.svd(J0, compute_uv=False)
    top = sv[:, 0]
    r = n - s
    rank_ok = (sv[:, r - 1] >= rank_tol * top) & (top > 0)
    if r < n:
        rank_ok &= sv[:, r] < rank_tol * top
    failures += _fail_lines(sc, U, ~rank_ok, f"rank of D1h is not {r}")
    checks["rank"] = bool(rank_ok.all())

    coeffs, noise = expansion_coefficients(sc, X)
    orders = _detect_orders(coeffs, noise)
    expected = expected_orders(n, s)
    order_ok = np.ones(len(U), dtype=bool)
    nondeg_ok = np.ones(len(U), dtype=bool)
    ranges = {}
    for i in range(1, n + 1):
        if i <= n - s:
            ranges[f"sigma_{i}"] = (float(sig0[:, i - 1].min()), float(sig0[:, i - 1].max()))
            continue
        e = expected[i - 1]
        lead = coeffs[:, i - 1, e]
        oi = orders[:, i - 1] >= e
        ni = np.abs(lead) > NONDEGEN_RTOL * noise[:, i - 1]
        failures += _fail_lines(sc, U, ~oi, f"sigma_{i} vanishes to order below {e}")
        failures += _fail_lines(sc, U, ~ni, f"sigma_hat_{i} vanishes", lead)
        order_ok &= oi
        nondeg_ok &= ni
        ranges[f"sigma_hat_{i}"] = (float(lead.min()), float(lead.max()))
    checks["orders"] = bool(order_ok.all())
    checks["nondegenerate"] = bool(nondeg_ok.all())
    min_orders = {f"sigma_{i}": int(orders[:, i - 1].min()) for i in range(1, n + 1)}
    return VerificationReport(sc.name, len(U), checks, failures, ranges, min_orders)


# ------------------------------------------------------------------ eigenvalue orders

@dataclass(frozen=True)
class EigenOrderReport:
    eps: tuple[float, float]
    slow_ratios: tuple[tuple[complex, ...], tuple[complex, ...]]
    slow_rel_change: tuple[float, ...]
    fast_limit: tuple[complex, ...]
    fast_errors: tuple[float, float]
    ok: bool


def spectrum_at(sc: Scenario, x, eps: float):
    return eigenvalues(sc.field.jacobian(np.asarray(x, dtype=float), sc.point(eps)))


def eigenvalue_order_check(sc: Scenario, x, eps: Sequence[float] | None = None,
                           rtol: float = 0.1) -> EigenOrderReport:
    """Slow eigenvalues scale like eps; fast ones tend to the roots of chi/tau^s.

    Uses the two smallest eps.  The slow ratios lambda/eps are Richardson
    extrapolated to eps = 0 and each ratio at the smaller eps must lie within
    ``rtol`` of the extrapolated value.
    """
    sched = sorted(eps if eps is not None else sc.eps_schedule)
    if len(sched) < 2:
        raise ScenarioError("eigenvalue order check needs at least two eps values")
    e1, e2 = sched[1], sched[0]     # e2 < e1
    n, s = sc.n, sc.s
    ratios = []
    fasts = []
    for e in (e1, e2):
        lam = spectrum_at(sc, x, e).by_modulus()
        ratios.append(tuple(z / e for z in lam[:s]))
        fasts.append(sorted(lam[s:], key=abs))
    changes = []
    for r1, r2 in zip(*ratios):
        r0 = r2 + (r2 - r1) * e2 / (e1 - e2)
        changes.append(abs(r2 - r0) / max(abs(r0), 1e-300))
    sig0 = sigma_functions(sc.field)(np.asarray(x, dtype=float), sc.pi_hat_vec)
    limit = sorted(roots_from_sigma(sig0[: n - s]), key=abs)
    errs = []
    for lam in fasts:
        errs.append(max(abs(a - b) / max(abs(b), 1e-300) for a, b in zip(lam, limit)))
    ok = all(c <= rtol for c in changes) and errs[1] <= max(errs[0], 1e-12) * 1.0001 + 1e-12
    return EigenOrderReport((e1, e2), (ratios[0], ratios[1]), tuple(changes),
                            tuple(limit), (errs[0], errs[1]), ok)
