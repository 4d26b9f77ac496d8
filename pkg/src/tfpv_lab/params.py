"""Distinguished timescale parameters from characteristic-polynomial coefficients.

Generic path: ratios of sigma_k (at pi_hat) and of the leading ray
coefficients sigma_hat_k are maximized/minimized over the box of the
critical-manifold chart.  Closed-form path: hard-coded formulas per network,
kept as expression strings so that they can be inspected and tested as text.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np
import sympy as sp

from .scenario import Scenario, ScenarioError, expansion_coefficients, expected_orders
from .spectral import check_dimensionless, roots_from_sigma

__all__ = [
    "DegenerateRatioError",
    "ClosedFormError",
    "Extremum",
    "RatioBounds",
    "DistinguishedParams",
    "ClosedForm",
    "ClosedFormCatalog",
    "RegimeFlags",
    "golden_section",
    "extremize",
    "sigma_hat_table",
    "eps_star_generic",
    "mu_star_generic",
    "mu_gate",
    "kappa_bounds",
    "delta_family",
    "closed_forms",
    "diagnose_regime",
    "analyze",
    "eqapre_holds",
    "FORMULAS",
    "NETWORK_ALIASES",
]

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
NEAR_INVARIANT_RATIO = 1e-2
THREE_TIMESCALE_RATIO = 1e-1


class DegenerateRatioError(ScenarioError):
    pass


class ClosedFormError(ValueError):
    pass


# ------------------------------------------------------------------ extrema

@dataclass(frozen=True)
class Extremum:
    value: float
    location: tuple[float, ...]
    refined: bool

    def as_dict(self, names: Sequence[str]) -> dict:
        return {"value": self.value,
                "at": {nm: v for nm, v in zip(names, self.location)},
                "refined_off_grid": self.refined}


def golden_section(f: Callable[[float], float], a: float, b: float,
                   maximize: bool = True, xtol: float = 1e-12,
                   max_iter: int = 200) -> tuple[float, float]:
    """Golden-section search for an extremum of a unimodal f on [a, b]."""
    sign = -1.0 if maximize else 1.0
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = sign * f(c), sign * f(d)
    for _ in range(max_iter):
        if abs(b - a) <= xtol * max(1.0, abs(a), abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = sign * f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = sign * f(d)
    x = c if fc < fd else d
    return x, sign * min(fc, fd)


def extremize(f: Callable[[np.ndarray], np.ndarray], box: Sequence[tuple[float, float]],
              grid_u: np.ndarray, grid_vals: np.ndarray, maximize: bool = True,
              passes: int = 3) -> Extremum:
    """Best grid point, then golden-section refinement along each axis.

    ``f`` maps an (N, s) array of points to N values.  Each refinement
    searches the bracket spanned by the neighbouring grid lines.
    """
    vals = np.where(np.isfinite(grid_vals), grid_vals, -np.inf if maximize else np.inf)
    i = int(np.argmax(vals) if maximize else np.argmin(vals))
    best_u = np.array(grid_u[i], dtype=float)
    best = float(vals[i])
    s = grid_u.shape[1]
    steps = []
    for j in range(s):
        axis = np.unique(grid_u[:, j])
        steps.append(float(np.max(np.diff(axis))) if axis.size > 1 else 0.0)
    refined = False

    def better(v, ref):
        return v > ref if maximize else v < ref

    for _ in range(passes):
        for j in range(s):
            if steps[j] == 0.0:
                continue
            lo = max(box[j][0], best_u[j] - steps[j])
            hi = min(box[j][1], best_u[j] + steps[j])

            def line(t, j=j):
                u = best_u.copy()
                u[j] = t
                return float(f(u[None, :])[0])

            t, v = golden_section(line, lo, hi, maximize=maximize)
            if math.isfinite(v) and better(v, best) and abs(v - best) > 1e-15 * abs(best):
                best_u[j] = t
                best = v
                refined = True
    return Extremum(best, tuple(float(v) for v in best_u), refined)


# ------------------------------------------------------------------ ratios

def sigma_hat_table(sc: Scenario, U) -> np.ndarray:
    """(N, n) table: sigma_i(x, pi_hat) for i <= n-s, sigma_hat_i(x, 0) beyond."""
    X = sc.embed(np.atleast_2d(U), check=False)
    coeffs, _ = expansion_coefficients(sc, X, noise=False)
    orders = expected_orders(sc.n, sc.s)
    return np.stack([coeffs[:, i, orders[i]] for i in range(sc.n)], axis=-1)


@dataclass(frozen=True)
class _Ratio:
    name: str
    num: tuple[int, ...]       # sigma indices, 0 meaning sigma_0 = 1
    den: tuple[int, ...]

    def __post_init__(self):
        if not check_dimensionless(self.num, self.den):
            raise AssertionError(f"ratio {self.name} is not dimensionless")

    def __call__(self, T: np.ndarray) -> np.ndarray:
        def col(k):
            return np.ones(T.shape[0]) if k == 0 else T[:, k - 1]
        num = np.ones(T.shape[0])
        den = np.ones(T.shape[0])
        for k in self.num:
            num = num * col(k)
        for k in self.den:
            den = den * col(k)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.abs(num / den)

    def denominator(self, T: np.ndarray) -> np.ndarray:
        den = np.ones(T.shape[0])
        for k in self.den:
            den = den * (np.ones(T.shape[0]) if k == 0 else T[:, k - 1])
        return den


def _eps_ratio(n: int, s: int) -> _Ratio:
    r = n - s
    return _Ratio("eps", (r + 1,), (1, r))


def _mu_ratio(n: int) -> _Ratio:
    return _Ratio("mu", (n, n - 2), (n - 1, n - 1))


def _kappa_ratio(n: int, s: int) -> _Ratio:
    if s == 1:
        if n < 3:
            raise ScenarioError("fast-block kappa needs at least two fast eigenvalues")
        return _Ratio("kappa", (2,), (1, 1))
    if s == 2 and n == 3:
        return _Ratio("kappa", (1, 3), (2, 2))
    raise ScenarioError(f"kappa bounds are defined for s=1 or (n=3, s=2), got n={n}, s={s}")


def _delta_ratio(n: int, s: int, j: int) -> _Ratio:
    return _Ratio(f"delta_{j}", (n - s + j,), (n - s + j - 1, 1))


@dataclass(frozen=True)
class RatioBounds:
    name: str
    sup: Extremum
    inf: Extremum
    eps: float
    scaled: bool           # True if the reported values are eps * ratio

    @property
    def hi(self) -> float:
        return self.eps * self.sup.value if self.scaled else self.sup.value

    @property
    def lo(self) -> float:
        return self.eps * self.inf.value if self.scaled else self.inf.value

    def as_dict(self, names: Sequence[str]) -> dict:
        return {"hi": self.hi, "lo": self.lo,
                "sup_ratio": self.sup.as_dict(names), "inf_ratio": self.inf.as_dict(names)}


@dataclass
class _BoxCache:
    U: np.ndarray
    T: np.ndarray


# keyed weakly by scenario identity so a recycled id() can never hit a stale table
_CACHE: "weakref.WeakKeyDictionary[Scenario, dict[int, _BoxCache]]" = weakref.WeakKeyDictionary()


def _box_table(sc: Scenario, grid: int) -> _BoxCache:
    per = _CACHE.setdefault(sc, {})
    hit = per.get(grid)
    if hit is None:
        U = sc.grid(grid)
        hit = per[grid] = _BoxCache(U, sigma_hat_table(sc, U))
    return hit


def _bounds(sc: Scenario, ratio: _Ratio, grid: int, eps: float, scaled: bool,
            want_sup: bool = True, want_inf: bool = True) -> RatioBounds:
    data = _box_table(sc, grid)
    den = ratio.denominator(data.T)
    bad = np.flatnonzero(~np.isfinite(den) | (den == 0))
    if bad.size:
        raise DegenerateRatioError(
            f"denominator of {ratio.name} ratio vanishes at {sc.describe(data.U[bad[0]])}")
    vals = ratio(data.T)
    box = [(lo, hi) for _, lo, hi in sc.box]

    def f(U):
        return ratio(sigma_hat_table(sc, U))

    sup = extremize(f, box, data.U, vals, maximize=True) if want_sup else None
    inf = extremize(f, box, data.U, vals, maximize=False) if want_inf else None
    return RatioBounds(ratio.name, sup, inf, eps, scaled)


def eps_star_generic(sc: Scenario, grid: int = 101, eps: float = 1.0) -> RatioBounds:
    """U = sup, L = inf of |sigma_hat_{n-s+1} / (sigma_1 sigma_{n-s})| over the box.

    ``hi``/``lo`` are eps*U and eps*L.
    """
    return _bounds(sc, _eps_ratio(sc.n, sc.s), grid, eps, True)


def mu_gate(sc: Scenario, grid: int = 101) -> str:
    """Realness of the fast block over the box: all_real, essentially_real or violated."""
    data = _box_table(sc, grid)
    m = sc.n - sc.s
    if m == 1:
        return "all_real"
    F = data.T[:, :m]
    if m == 2:
        disc = F[:, 0] ** 2 - 4 * F[:, 1]
        if np.all(disc >= 0):
            return "all_real"
        if np.all(F[:, 0] ** 2 - 2 * F[:, 1] > 0):
            return "essentially_real"
        return "violated"
    real = ess = True
    for row in F:
        roots = roots_from_sigma(row)
        real &= all(abs(z.imag) <= 1e-12 * abs(z) for z in roots)
        ess &= all(abs(z.real) > abs(z.imag) for z in roots)
    return "all_real" if real else ("essentially_real" if ess else "violated")


def mu_star_generic(sc: Scenario, grid: int = 101, eps: float = 1.0) -> tuple[RatioBounds, str]:
    """eps * sup |sigma_hat_n sigma_{n-2} / sigma_{n-1}^2| with its realness gate."""
    if sc.s != 1:
        raise ScenarioError("mu* is defined for s = 1 only")
    return _bounds(sc, _mu_ratio(sc.n), grid, eps, True, want_inf=False), mu_gate(sc, grid)


def kappa_bounds(sc: Scenario, grid: int = 101) -> RatioBounds:
    """Disparity of fast (s=1) or slow (n=3, s=2) eigenvalues; eps-free."""
    return _bounds(sc, _kappa_ratio(sc.n, sc.s), grid, 1.0, False)


def delta_family(sc: Scenario, grid: int = 101, eps: float = 1.0) -> list[RatioBounds]:
    if sc.s <= 1:
        return []
    return [_bounds(sc, _delta_ratio(sc.n, sc.s, j), grid, eps, True)
            for j in range(2, sc.s + 1)]


# ------------------------------------------------------------------ closed forms

# network id -> {name: (scenario id, expression)}
FORMULAS: dict[str, dict[str, tuple[str, str]]] = {
    "mm.irrev": {
        "eps_BH": ("e0", "e0/s0"),
        "eps_RS": ("e0", "k1*e0/(km1 + k2)"),
        "eps_SSl": ("e0", "k1*e0/(km1 + k2 + k1*s0)"),
        "eps_MM": ("e0", "e0*k1*k2/(km1 + k2)**2"),
        "eps_PE": ("slowprod.k2", "2*k2/sqrt(km1*k1*e0)"),
        "eps_inf": ("slowprod.k2", "(k1*e0 + km1)/(k1*e0)*2*k2/sqrt(km1*k1*e0)"),
    },
    "mm.rev": {
        "eps_MMR": ("e0", "e0*(k1*km2*s0 + k1*k2 + km1*km2)/(km1 + k2 + km2*s0)**2"),
        "eps_MMR_lower": ("e0", "e0*(k1*km2*s0 + k1*k2 + km1*km2)/(km1 + k2 + k1*s0)**2"),
    },
    "coop": {
        "eps_MM": ("e0", "e0*k1*k2/(km1 + k2)**2"),
        "eps_C": ("e0", "e0*k1*k2/(km1 + k2)**2*(k3*k4*s0*(km1 + k2)/(k2*(km1 + k2 + km3 + k4)*(km3 + k4))"
                        " + (km1 + k2)/(km1 + k2 + km3 + k4))"),
        "eps_C_lower": ("e0", "e0*k1*k2/(km1 + k2)**2*(km1 + k2)/(km1 + k2 + km3 + k4)"),
        "mu_C": ("e0", "e0*k1*k2/(km1 + k2)**2*((k3*k4*s0 + k2*(km3 + k4))/(k2*(km3 + k4))"
                       "*((k1 + k3)*s0 + km1 + k2 + km3 + k4)/(km3 + k4))"),
        "mu_C_lower": ("e0", "e0*k1*k2/(km1 + k2)**2*(km1 + k2 + km3 + k4)/(km3 + k4)"),
    },
    "uncomp": {
        "eps_MM": ("e0", "e0*k1*k2/(km1 + k2)**2"),
        "eps_U": ("e0", "e0*k1*k2/(km1 + k2)**2*(km1 + k2)/(k3*i0 + km3 + km1 + k2)"),
        "mu_U": ("e0", "e0*k1*k2/(km1 + k2)**2*(k3*i0 + k2 + km1 + km3)/km3"),
        "delta_star": ("k1km3", "(k1*(k3*i0*(e0 + s0) + k2*e0) + km3*(km1 + k2))/(km1 + k2)**2"),
        "delta_lower": ("k1km3", "(k1*k2*(e0 - i0) + km3*(km1 + k2))/(km1 + k2 + k3*i0)**2"),
        "nu_star": ("k1km3", "(km1 + k2 + k3*i0)*k1*km3*k2*e0/(k1*k2*e0 + km3*(km1 + k2))**2"),
        "nu_lower": ("k1km3", "(km1 + k2)*k1*km3*k2*(e0 - i0)"
                              "/(k1*(k3*i0*(e0 + s0) + k2*e0) + km3*(km1 + k2))**2"),
    },
    "comp": {
        "eps_MM": ("e0", "e0*k1*k2/(km1 + k2)**2"),
        "eps_RS": ("e0", "k1*e0/(km1 + k2)"),
        "eps_I": ("e0", "e0*k1*k2/(km1 + k2)**2*(km1 + k2)/(km1 + k2 + k3*i0 + km3)"),
        "mu_I1": ("e0", "e0*k1*k2/(km1 + k2)**2*(km1 + k2 + k3*i0 + km3)/(k3*i0 + km3)"),
        "mu_I2": ("e0", "k2*k1*e0*(k3*i0 + km3)/(4*km3*(k3*i0*(km1 + k2) - km3*(k3*i0 + km3)))"),
        "mu_tilde_I": ("e0", "e0*k1*k2/(km1 + k2)**2*(k1*s0 + km1 + k2 + k3*i0 + km3)/(k3*i0 + km3)"),
        "eps_star_2d": ("k1k3km3", "(k1*k2*e0 + (k3*(e0 + i0) + km3)*(km1 + k2))/(km1 + k2)**2"),
        "eps_lower_2d": ("k1k3km3", "(k1*k2*(e0 - i0) + (k3*(e0 - i0) + km3)*(km1 + k2))/(km1 + k2)**2"),
        "nu_star": ("k1k3km3", "k1*k2*e0*(k3*(e0 + i0) + km3)*(km1 + k2)"
                               "/(k1*k2*(e0 - i0) + (k3*(e0 - i0) + km3)*(km1 + k2))**2"),
        "nu_lower": ("k1k3km3", "k1*k2*(e0 - i0)*(k3*(e0 - i0) + km3)*(km1 + k2)"
                                "/(k1*k2*e0 + (k3*(e0 + i0) + km3)*(km1 + k2))**2"),
        "c2_tilde": ("cascade", "2*e0*i0*k3/(k3*(e0 + i0) + km3 + sqrt((k3*(e0 + i0) + km3)**2"
                                " - 4*k3**2*e0*i0))"),
    },
}

NETWORK_ALIASES = {
    "mm": "mm.irrev", "mm.irrev": "mm.irrev", "mm.degenerate": "mm.irrev",
    "mm.slowprod": "mm.irrev", "mm.rev": "mm.rev",
    "coop": "coop", "coop.degenerate": "coop",
    "uncomp": "uncomp", "uncomp.k1km3": "uncomp",
    "comp": "comp", "comp.k1k3km3": "comp", "comp.cascade": "comp",
}


def canonical_network(network_id: str) -> str:
    try:
        return NETWORK_ALIASES[network_id]
    except KeyError:
        raise ClosedFormError(f"unknown network id {network_id!r}") from None


@lru_cache(maxsize=None)
def _compiled(expr_text: str):
    expr = sp.sympify(expr_text, locals={n: sp.Symbol(n) for n in
                                         ("S", "E", "I", "C", "N", "O", "Q")})
    names = sorted(str(s) for s in expr.free_symbols)
    return expr, names, sp.lambdify([sp.Symbol(nm) for nm in names], expr, modules="math")


@dataclass(frozen=True)
class ClosedForm:
    name: str
    network: str
    scenario: str
    formula: str
    value: float | None
    error: str | None = None

    @property
    def expr(self) -> sp.Expr:
        return _compiled(self.formula)[0]


def eqapre_holds(p: Mapping[str, float]) -> bool:
    """Monotonicity condition for the competitive mu*: equality counts as holding."""
    k3i0 = p["k3"] * p["i0"]
    kk = p["km1"] + p["k2"]
    return 2 * p["km3"] * (k3i0 + p["km3"]) + p["km3"] * kk >= kk * k3i0


@dataclass
class ClosedFormCatalog:
    network: str
    point: dict[str, float]
    forms: dict[str, ClosedForm]
    eqapre: bool | None = None

    def __getitem__(self, name: str) -> float:
        cf = self.forms[name]
        if cf.value is None:
            raise ClosedFormError(f"{name}: {cf.error}")
        return cf.value

    def __contains__(self, name: str) -> bool:
        return name in self.forms and self.forms[name].value is not None

    def values(self) -> dict[str, float | None]:
        return {k: v.value for k, v in self.forms.items()}

    def as_dict(self) -> dict:
        out = {"network": self.network, "values": {}, "formulas": {}, "scenarios": {}}
        for k, cf in self.forms.items():
            out["values"][k] = cf.value
            out["formulas"][k] = cf.formula
            out["scenarios"][k] = cf.scenario
        if self.eqapre is not None:
            out["eqApre_holds"] = self.eqapre
        return out


def _evaluate(formula: str, point: Mapping[str, float]) -> float:
    _, names, fn = _compiled(formula)
    missing = [nm for nm in names if nm not in point]
    if missing:
        raise ClosedFormError(f"missing parameters {missing}")
    try:
        val = fn(*[float(point[nm]) for nm in names])
    except ZeroDivisionError:
        raise ClosedFormError("division by zero") from None
    except ValueError as exc:           # sqrt of a negative number
        raise ClosedFormError(str(exc)) from None
    if isinstance(val, complex) or not math.isfinite(val):
        raise ClosedFormError(f"non-finite value {val}")
    return float(val)


def closed_forms(network_id: str, point: Mapping[str, float],
                 strict: bool = False) -> ClosedFormCatalog:
    """Evaluate every catalog formula of the network at ``point``.

    A formula whose parameters are missing or whose denominator vanishes is
    kept with ``value=None`` and an error note (raised instead when
    ``strict``).  For competitive inhibition ``mu_I`` is the eqApre selection
    between ``mu_I1`` and ``mu_I2``.
    """
    net = canonical_network(network_id)
    forms = {}
    for name, (scen, formula) in FORMULAS[net].items():
        try:
            val, err = _evaluate(formula, point), None
        except ClosedFormError as exc:
            if strict:
                raise ClosedFormError(f"{net}.{name}: {exc}") from None
            val, err = None, str(exc)
        forms[name] = ClosedForm(name, net, scen, formula, val, err)
    eqa = None
    if net == "comp" and all(k in point for k in ("k3", "i0", "km1", "k2", "km3")):
        eqa = eqapre_holds(point)
        pick = "mu_I1" if eqa else "mu_I2"
        src = forms[pick]
        forms["mu_I"] = ClosedForm("mu_I", net, "e0", src.formula, src.value, src.error)
        if not eqa and forms["mu_I2"].value is None and strict:
            raise ClosedFormError("mu_I2 undefined")
    return ClosedFormCatalog(net, dict(point), forms, eqa)


# ------------------------------------------------------------------ regime flags

@dataclass
class RegimeFlags:
    network: str
    eqApre_holds: bool | None
    near_invariant: bool | None
    near_invariant_ratio: float | None
    mu_large_eps_small: bool | None
    eps_value: float | None
    mu_value: float | None
    three_timescale_hint: bool | None
    kappa_value: float | None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def diagnose_regime(network_id: str, point: Mapping[str, float],
                    eps_value: float | None = None, mu_value: float | None = None,
                    kappa_value: float | None = None) -> RegimeFlags:
    """Regime flags for a catalog mechanism at a parameter point.

    Missing eps/mu values are taken from the closed forms (inhibition
    mechanisms) or computed on the catalog cooperative scenario.
    """
    net = canonical_network(network_id)
    cat = closed_forms(net, point)
    eqa = cat.eqapre
    ratio = None
    if net in ("uncomp", "comp"):
        if point.get("km3", 0) > 0:
            ratio = point["k3"] * point["i0"] / point["km3"]
    elif net == "coop":
        if point.get("km3", 0) + point.get("k4", 0) > 0:
            ratio = point["k3"] * point["s0"] / (point["km3"] + point["k4"])
    near = None if ratio is None else ratio <= NEAR_INVARIANT_RATIO

    if eps_value is None or mu_value is None:
        e_cf, m_cf = {"uncomp": ("eps_U", "mu_U"), "comp": ("eps_I", "mu_I"),
                      "mm.irrev": ("eps_MM", None), "mm.rev": ("eps_MMR", None)}.get(net, (None, None))
        if net == "coop":
            try:
                from .catalog import scenario_for_point
                sc = scenario_for_point("coop", point)
                e_gen = eps_star_generic(sc).hi
                m_gen = mu_star_generic(sc)[0].hi
            except (ScenarioError, KeyError):
                e_gen = m_gen = None
            eps_value = e_gen if eps_value is None else eps_value
            mu_value = m_gen if mu_value is None else mu_value
        else:
            if eps_value is None and e_cf and e_cf in cat:
                eps_value = cat[e_cf]
            if mu_value is None and m_cf and m_cf in cat:
                mu_value = cat[m_cf]
    mles = None
    if eps_value is not None and mu_value is not None:
        mles = mu_value > 1.0 and eps_value < 1e-2

    if kappa_value is None and "nu_star" in cat:
        kappa_value = cat["nu_star"]
    hint = None if kappa_value is None else kappa_value < THREE_TIMESCALE_RATIO
    return RegimeFlags(net, eqa, near, ratio, mles, eps_value, mu_value, hint, kappa_value)


# ------------------------------------------------------------------ analysis record

@dataclass
class DistinguishedParams:
    scenario: str
    eps: float
    slow_names: tuple[str, ...]
    eps_bounds: RatioBounds
    mu: RatioBounds | None = None
    mu_gate: str | None = None
    kappa: RatioBounds | None = None
    deltas: list[RatioBounds] = dc_field(default_factory=list)
    catalog: ClosedFormCatalog | None = None
    flags: RegimeFlags | None = None

    @property
    def eps_star(self) -> float:
        return self.eps_bounds.hi

    @property
    def eps_lower(self) -> float:
        return self.eps_bounds.lo

    @property
    def mu_star(self) -> float | None:
        return None if self.mu is None else self.mu.hi

    @property
    def mu_certified(self) -> bool | None:
        return None if self.mu_gate is None else self.mu_gate != "violated"

    @property
    def kappa_star_hi(self) -> float | None:
        return None if self.kappa is None else self.kappa.hi

    @property
    def kappa_star_lo(self) -> float | None:
        return None if self.kappa is None else self.kappa.lo

    @property
    def nu_hi(self) -> float | None:
        return self._cat("nu_star")

    @property
    def nu_lo(self) -> float | None:
        return self._cat("nu_lower")

    def _cat(self, name):
        if self.catalog is None or name not in self.catalog:
            return None
        return self.catalog[name]

    def as_dict(self) -> dict:
        names = self.slow_names
        out = {
            "scenario": self.scenario,
            "eps": self.eps,
            "eps_star": self.eps_star,
            "eps_lower": self.eps_lower,
            "eps_bounds": self.eps_bounds.as_dict(names),
            "mu_star": self.mu_star,
            "mu_gate": self.mu_gate,
            "mu_certified": self.mu_certified,
            "mu_bounds": None if self.mu is None else {
                "hi": self.mu.hi, "sup_ratio": self.mu.sup.as_dict(names)},
            "kappa_star_hi": self.kappa_star_hi,
            "kappa_star_lo": self.kappa_star_lo,
            "kappa_bounds": None if self.kappa is None else self.kappa.as_dict(names),
            "delta_js": [{"name": d.name, "hi": d.hi, "lo": d.lo} for d in self.deltas],
            "nu_hi": self.nu_hi,
            "nu_lo": self.nu_lo,
            "closed_forms": None if self.catalog is None else self.catalog.as_dict(),
            "flags": None if self.flags is None else self.flags.as_dict(),
        }
        return out


def analyze(sc: Scenario, grid: int = 101, eps: float = 1.0,
            network_id: str | None = None) -> DistinguishedParams:
    """All generic parameters on the box, plus catalog values and regime flags."""
    eb = eps_star_generic(sc, grid, eps)
    mu = gate = kap = None
    if sc.s == 1:
        mu, gate = mu_star_generic(sc, grid, eps)
    if (sc.s == 1 and sc.n >= 3) or (sc.s == 2 and sc.n == 3):
        try:
            kap = kappa_bounds(sc, grid)
        except DegenerateRatioError:
            kap = None
    deltas = delta_family(sc, grid, eps)
    cat = flags = None
    if network_id is not None:
        point = sc.point_dict(eps)
        point.update(sc.extras)
        cat = closed_forms(network_id, point)
        kval = None if kap is None else kap.hi
        flags = diagnose_regime(network_id, point, eb.hi,
                                None if mu is None else mu.hi, kval)
    return DistinguishedParams(sc.name, eps, sc.chart.slow, eb, mu, gate, kap, deltas, cat, flags)
