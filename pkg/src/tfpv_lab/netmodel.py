"""Reaction-network DSL, mass-action kinetics and conservation-law elimination.

A network source looks like::

    species S, E, C, P
    param k1, km1, k2, e0, s0
    reaction bind: E + S <-> C @ k1, km1
    reaction cat: C -> E + P @ k2
    init S = s0
    init E = e0

Reversible arrows expand into two irreversible reactions; the reverse one is
named ``NAME_r``.  The ODE right-hand side is kept symbolic (sympy) with
integer stoichiometric coefficients and compiled to numpy callables for
evaluation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
import sympy as sp

__all__ = [
    "DSLError",
    "NetworkError",
    "Reaction",
    "Network",
    "PolyVectorField",
    "parse_network",
    "unparse_network",
    "eliminate_conservation",
    "evaluate",
    "jacobian",
    "check_parameter_point",
]

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_IDENT_RE = re.compile(rf"^{_IDENT}$")


class DSLError(ValueError):
    """Syntax or declaration error in network source, with a 1-based position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


class NetworkError(ValueError):
    """Structural error outside the parser (bad totals, dimension mismatch)."""


@dataclass(frozen=True)
class Reaction:
    name: str
    reactants: tuple[tuple[str, int], ...]
    products: tuple[tuple[str, int], ...]
    rate_param: str

    @property
    def is_inflow(self) -> bool:
        return not self.reactants


@dataclass(frozen=True)
class Network:
    species: tuple[str, ...]
    parameters: tuple[str, ...]
    reactions: tuple[Reaction, ...]
    inits: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        sp_set, par_set = set(self.species), set(self.parameters)
        for r in self.reactions:
            if r.rate_param not in par_set:
                raise NetworkError(f"reaction {r.name}: undeclared parameter {r.rate_param}")
            for name, _ in r.reactants + r.products:
                if name not in sp_set:
                    raise NetworkError(f"reaction {r.name}: undeclared species {name}")

    @cached_property
    def stoich(self) -> np.ndarray:
        """Integer matrix (species x reactions) of net production counts."""
        idx = {s: i for i, s in enumerate(self.species)}
        out = np.zeros((len(self.species), len(self.reactions)), dtype=np.int64)
        for j, r in enumerate(self.reactions):
            for name, c in r.products:
                out[idx[name], j] += c
            for name, c in r.reactants:
                out[idx[name], j] -= c
        return out

    @property
    def rate_exponents(self) -> tuple[tuple[tuple[str, int], ...], ...]:
        return tuple(r.reactants for r in self.reactions)

    @cached_property
    def conservation_laws(self) -> tuple[tuple[int, ...], ...]:
        """Integer basis of the left null space of the stoichiometric matrix."""
        if not self.reactions:
            return tuple(tuple(int(i == j) for j in range(len(self.species)))
                         for i in range(len(self.species)))
        basis = sp.Matrix(self.stoich.T.tolist()).nullspace()
        laws = []
        for v in basis:
            den = sp.ilcm(*[sp.fraction(c)[1] for c in v])
            ints = [int(c * den) for c in v]
            g = sp.igcd(*ints) or 1
            ints = [i // g for i in ints]
            if sum(ints) < 0 or (sum(ints) == 0 and next(i for i in ints if i) < 0):
                ints = [-i for i in ints]
            laws.append(tuple(ints))
        return tuple(laws)

    @cached_property
    def symbols(self) -> dict[str, sp.Symbol]:
        return {n: sp.Symbol(n) for n in self.species + self.parameters}

    def rates(self) -> list[sp.Expr]:
        out = []
        for r in self.reactions:
            term = self.symbols[r.rate_param]
            for name, c in r.reactants:
                term = term * self.symbols[name] ** c
            out.append(term)
        return out

    def mass_action_rhs(self) -> list[sp.Expr]:
        rates = self.rates()
        S = self.stoich
        return [sp.expand(sum(int(S[i, j]) * rates[j] for j in range(len(rates))))
                for i in range(len(self.species))]

    def field(self) -> "PolyVectorField":
        """The full mass-action field without any elimination."""
        return eliminate_conservation(self, {})


# ---------------------------------------------------------------- parsing

def _split_idents(text: str, lineno: int, col0: int) -> list[tuple[str, int]]:
    out = []
    pos = 0
    for part in text.split(","):
        stripped = part.strip()
        col = col0 + pos + (len(part) - len(part.lstrip()))
        if not _IDENT_RE.match(stripped):
            raise DSLError(f"expected identifier, got {stripped!r}", lineno, col + 1)
        out.append((stripped, col + 1))
        pos += len(part) + 1
    return out


_TERM_RE = re.compile(rf"^(?:(\d+)\s*\*?\s*)?({_IDENT})$")


def _parse_complex(text: str, lineno: int, col0: int) -> list[tuple[str, int, int]]:
    stripped = text.strip()
    if stripped in ("", "0"):
        return []
    out = []
    pos = 0
    for part in text.split("+"):
        term = part.strip()
        col = col0 + pos + (len(part) - len(part.lstrip())) + 1
        m = _TERM_RE.match(term)
        if not m:
            raise DSLError(f"bad complex term {term!r}", lineno, col)
        coef = int(m.group(1)) if m.group(1) else 1
        if coef <= 0:
            raise DSLError("stoichiometric coefficient must be positive", lineno, col)
        out.append((m.group(2), coef, col))
        pos += len(part) + 1
    return out


def _merge(terms):
    acc: dict[str, int] = {}
    for name, c, _ in terms:
        acc[name] = acc.get(name, 0) + c
    return tuple(acc.items())


def parse_network(text: str) -> Network:
    """Parse DSL source into a Network; raises DSLError with line/column."""
    species: list[str] = []
    params: list[str] = []
    reactions: list[Reaction] = []
    inits: list[tuple[str, str]] = []
    pending = []  # (lineno, reaction pieces) checked after all declarations
    declared: dict[str, str] = {}

    def declare(name, kind, lineno, col):
        if name in declared:
            raise DSLError(f"duplicate declaration of {name!r}", lineno, col)
        declared[name] = kind

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        body = line.strip()
        kw, _, rest = body.partition(" ")
        rest_col = indent + len(kw) + 1
        if kw in ("species", "param"):
            if not rest.strip():
                raise DSLError(f"empty {kw} declaration", lineno, indent + 1)
            for name, col in _split_idents(rest, lineno, rest_col):
                declare(name, kw, lineno, col)
                (species if kw == "species" else params).append(name)
        elif kw == "reaction":
            m = re.match(rf"^\s*({_IDENT})\s*:(.*)@(.*)$", rest)
            if not m:
                raise DSLError("expected 'reaction NAME: LHS -> RHS @ k'", lineno, rest_col + 1)
            name, eq, rate = m.group(1), m.group(2), m.group(3)
            eq_col = rest_col + m.start(2)
            if "<->" in eq:
                lhs, rhs = eq.split("<->", 1)
                arrow_len, reversible = 3, True
            elif "->" in eq:
                lhs, rhs = eq.split("->", 1)
                arrow_len, reversible = 2, False
            else:
                raise DSLError("missing reaction arrow", lineno, eq_col + 1)
            lterms = _parse_complex(lhs, lineno, eq_col)
            rterms = _parse_complex(rhs, lineno, eq_col + len(lhs) + arrow_len)
            rate_col = rest_col + m.start(3)
            rates = _split_idents(rate, lineno, rate_col)
            if len(rates) != (2 if reversible else 1):
                raise DSLError(
                    "reversible reaction needs '@ kf, kr'" if reversible
                    else "irreversible reaction takes exactly one rate parameter",
                    lineno, rate_col + 1)
            if not lterms and not rterms:
                raise DSLError("reaction with empty reactants and products", lineno, eq_col + 1)
            declare(name, "reaction", lineno, rest_col + m.start(1) + 1)
            if reversible:
                declare(name + "_r", "reaction", lineno, rest_col + m.start(1) + 1)
            pending.append((lineno, lterms + rterms, rates))
            reactions.append(Reaction(name, _merge(lterms), _merge(rterms), rates[0][0]))
            if reversible:
                reactions.append(Reaction(name + "_r", _merge(rterms), _merge(lterms), rates[1][0]))
        elif kw == "init":
            m = re.match(rf"^\s*({_IDENT})\s*=\s*({_IDENT})\s*$", rest)
            if not m:
                raise DSLError("expected 'init SPECIES = PARAM'", lineno, rest_col + 1)
            pending.append((lineno, [(m.group(1), 1, rest_col + m.start(1) + 1)],
                            [(m.group(2), rest_col + m.start(2) + 1)]))
            if m.group(1) in dict(inits):
                raise DSLError(f"duplicate init for {m.group(1)!r}", lineno, rest_col + 1)
            inits.append((m.group(1), m.group(2)))
        else:
            raise DSLError(f"unknown statement {kw!r}", lineno, indent + 1)

    for lineno, terms, rates in pending:
        for name, _, col in terms:
            if declared.get(name) != "species":
                raise DSLError(f"undeclared species {name!r}", lineno, col)
        for name, col in rates:
            if declared.get(name) != "param":
                raise DSLError(f"undeclared parameter {name!r}", lineno, col)

    return Network(tuple(species), tuple(params), tuple(reactions), tuple(inits))


def _complex_text(terms) -> str:
    if not terms:
        return "0"
    return " + ".join(name if c == 1 else f"{c}*{name}" for name, c in terms)


def unparse_network(net: Network) -> str:
    """Render a Network as DSL text (reactions appear irreversible)."""
    lines = []
    if net.species:
        lines.append("species " + ", ".join(net.species))
    if net.parameters:
        lines.append("param " + ", ".join(net.parameters))
    for r in net.reactions:
        lines.append(f"reaction {r.name}: {_complex_text(r.reactants)} -> "
                     f"{_complex_text(r.products)} @ {r.rate_param}")
    for sp_name, p in net.inits:
        lines.append(f"init {sp_name} = {p}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- vector field

def _compile(exprs: Sequence[sp.Expr], args: Sequence[sp.Symbol]):
    return sp.lambdify(list(args), list(exprs), modules="numpy", cse=True)


@dataclass(frozen=True, eq=False)
class PolyVectorField:
    """Polynomial ODE right-hand side over named states and parameters.

    Evaluation functions broadcast: ``x`` may have shape ``(..., n)`` and the
    parameter vector shape ``(..., m)``.
    """

    states: tuple[str, ...]
    params: tuple[str, ...]
    exprs: tuple[sp.Expr, ...]
    inits: tuple[tuple[str, str], ...] = ()
    eliminated: tuple[tuple[str, sp.Expr], ...] = ()

    @property
    def n(self) -> int:
        return len(self.states)

    @cached_property
    def state_symbols(self) -> tuple[sp.Symbol, ...]:
        return tuple(sp.Symbol(s) for s in self.states)

    @cached_property
    def param_symbols(self) -> tuple[sp.Symbol, ...]:
        return tuple(sp.Symbol(p) for p in self.params)

    @cached_property
    def jacobian_exprs(self) -> sp.Matrix:
        return sp.Matrix(self.exprs).jacobian(self.state_symbols)

    @cached_property
    def param_jacobian_exprs(self) -> sp.Matrix:
        return sp.Matrix(self.exprs).jacobian(self.param_symbols)

    @cached_property
    def max_param_degree(self) -> int:
        """Largest total degree in the parameters over all Jacobian entries."""
        deg = 0
        for e in self.jacobian_exprs:
            if e != 0:
                deg = max(deg, sp.Poly(e, *self.param_symbols).total_degree())
        return deg

    @cached_property
    def _fns(self):
        args = self.state_symbols + self.param_symbols
        return (_compile(self.exprs, args),
                _compile(list(self.jacobian_exprs), args),
                _compile(list(self.param_jacobian_exprs), args))

    def param_vector(self, point, default: float | None = None) -> np.ndarray:
        """Parameter array in declaration order from a mapping or array."""
        if isinstance(point, Mapping):
            unknown = set(point) - set(self.params)
            if unknown:
                raise NetworkError(f"unknown parameters: {sorted(unknown)}")
            vals = []
            for p in self.params:
                if p in point:
                    vals.append(float(point[p]))
                elif default is not None:
                    vals.append(default)
                else:
                    raise NetworkError(f"missing parameter {p!r}")
            return np.array(vals)
        arr = np.asarray(point, dtype=float)
        if arr.shape[-1] != len(self.params):
            raise NetworkError(f"expected {len(self.params)} parameters, got {arr.shape[-1]}")
        return arr

    def _call(self, fn, x, p, tail: tuple[int, ...]):
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.n,):
            raise NetworkError(f"state has shape {x.shape}, expected (..., {self.n})")
        pv = self.param_vector(p)
        args = [x[..., i] for i in range(self.n)] + [pv[..., j] for j in range(len(self.params))]
        vals = fn(*args)
        shape = np.broadcast_shapes(x.shape[:-1], pv.shape[:-1])
        out = np.empty(shape + (int(np.prod(tail)),))
        for i, v in enumerate(vals):
            out[..., i] = v
        return out.reshape(shape + tail)

    def evaluate(self, x, p) -> np.ndarray:
        return self._call(self._fns[0], x, p, (self.n,))

    def jacobian(self, x, p) -> np.ndarray:
        return self._call(self._fns[1], x, p, (self.n, self.n))

    def param_jacobian(self, x, p) -> np.ndarray:
        return self._call(self._fns[2], x, p, (self.n, len(self.params)))

    def initial_state(self, p) -> np.ndarray:
        """State from the network's ``init`` bindings; unbound states start at 0."""
        pv = dict(zip(self.params, self.param_vector(p)))
        bound = dict(self.inits)
        return np.array([pv[bound[s]] if s in bound else 0.0 for s in self.states])

    def system(self, p):
        """Autonomous ODE callables ``(f, jac)`` with parameters bound."""
        pv = self.param_vector(p)
        f_fn, j_fn, _ = self._fns
        n = self.n
        pl = [float(v) for v in pv]

        def f(x):
            return np.array(f_fn(*x, *pl), dtype=float)

        def jac(x):
            return np.array(j_fn(*x, *pl), dtype=float).reshape(n, n)

        return f, jac


def _parse_law(text: str, species: Sequence[str]) -> tuple[str, np.ndarray]:
    vec = np.zeros(len(species), dtype=np.int64)
    first = None
    for part in text.split("+"):
        m = _TERM_RE.match(part.strip())
        if not m:
            raise NetworkError(f"bad conserved quantity {text!r}")
        name = m.group(2)
        if name not in species:
            raise NetworkError(f"conserved quantity {text!r}: undeclared species {name!r}")
        vec[species.index(name)] += int(m.group(1) or 1)
        first = first or name
    return first, vec


def eliminate_conservation(net: Network, totals: Mapping[str, str]) -> PolyVectorField:
    """Remove one species per conservation law.

    ``totals`` maps a conserved linear combination such as ``"E + C1 + C2"``
    to the parameter holding its total; the first species named is the one
    eliminated.
    """
    syms = net.symbols
    laws = []
    for text, total in totals.items():
        if total not in net.parameters:
            raise NetworkError(f"total {total!r} is not a declared parameter")
        name, vec = _parse_law(text, net.species)
        if net.reactions and np.any(vec @ net.stoich != 0):
            raise NetworkError(f"{text!r} is not in the left null space of the stoichiometric matrix")
        laws.append((name, vec, total))
    gone = [name for name, _, _ in laws]
    if len(set(gone)) != len(gone):
        raise NetworkError("each conservation law must eliminate a different species")
    eqs = [sum(int(c) * syms[s] for s, c in zip(net.species, vec)) - syms[total]
           for _, vec, total in laws]
    subs = {}
    if eqs:
        sol = sp.solve(eqs, [syms[g] for g in gone], dict=True)
        if len(sol) != 1 or len(sol[0]) != len(gone):
            raise NetworkError("conservation laws do not determine the eliminated species")
        subs = {k: sp.expand(v) for k, v in sol[0].items()}
    rhs = net.mass_action_rhs()
    keep = [i for i, s in enumerate(net.species) if s not in gone]
    exprs = tuple(sp.expand(rhs[i].subs(subs)) for i in keep)
    states = tuple(net.species[i] for i in keep)
    inits = tuple((s, p) for s, p in net.inits if s in states)
    return PolyVectorField(states, net.parameters, exprs, inits,
                           tuple((str(k), v) for k, v in subs.items()))


def evaluate(field: PolyVectorField, x, p) -> np.ndarray:
    return field.evaluate(x, p)


def jacobian(field: PolyVectorField, x, p) -> np.ndarray:
    return field.jacobian(x, p)


def check_parameter_point(point: Mapping[str, float]) -> dict[str, float]:
    """Validate a parameter point: finite, nonnegative values."""
    out = {}
    for k, v in point.items():
        v = float(v)
        if not np.isfinite(v) or v < 0:
            raise NetworkError(f"parameter {k} = {v} must be finite and nonnegative")
        out[k] = v
    return out
