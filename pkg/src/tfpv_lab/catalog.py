"""Built-in mechanisms: network files, scenarios and figure parameter sets.

Fixtures live as JSON under ``data/fixtures`` next to the ``.crn`` network
files, so they can be copied and edited.  A fixture id names a file, or a
file plus scenario (``comp.k1k3km3``), or one of a few shorthands.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Mapping

from .netmodel import eliminate_conservation, parse_network
from .params import analyze, closed_forms
from .scenario import DATA_DIR, Scenario, ScenarioError, scenario_from_dict

__all__ = [
    "FIXTURE_DIR",
    "EXPECTED_RTOL",
    "Fixture",
    "FixtureError",
    "ExpectedCheck",
    "load_fixture",
    "list_fixtures",
    "scenario_for_point",
    "check_expected",
]

FIXTURE_DIR = DATA_DIR / "fixtures"
EXPECTED_RTOL = 0.05

# id -> (fixture file stem, scenario, figure)
SHORTHANDS = {
    "mm": ("mm.irrev", None, None),
    "mm.degenerate": ("mm.irrev", "degenerate", None),
    "coop.degenerate": ("coop", "degenerate", None),
    "comp.cascade": ("comp", "k1k3km3", "fig333"),
}

# expected-value names that have a box-supremum counterpart
GENERIC = {
    "eps_star": "eps_star", "eps_lower": "eps_lower", "mu_star": "mu_star",
    "eps_U": "eps_star", "eps_I": "eps_star",
    "mu_U": "mu_star", "mu_I1": "mu_star", "mu_I2": "mu_star",
}


class FixtureError(ScenarioError):
    pass


@dataclass(frozen=True)
class ExpectedCheck:
    fixture: str
    figure: str
    name: str
    expected: float
    computed: float
    route: str
    rtol: float
    known_mismatch: str | None = None

    @property
    def rel_error(self) -> float:
        return abs(self.computed - self.expected) / abs(self.expected)

    @property
    def ok(self) -> bool:
        return math.isfinite(self.computed) and self.rel_error <= self.rtol

    def as_dict(self) -> dict:
        return {"fixture": self.fixture, "figure": self.figure, "name": self.name,
                "expected": self.expected, "computed": self.computed, "route": self.route,
                "rel_error": self.rel_error, "ok": self.ok, "known_mismatch": self.known_mismatch}


@dataclass(eq=False)
class Fixture:
    id: str
    doc: dict
    path: Path
    scenario_id: str
    figure_id: str | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def network_text(self) -> str:
        return (DATA_DIR / "networks" / self.doc["network"]).read_text()

    @property
    def closed_form_id(self) -> str:
        return self.doc["closed_forms"]

    @property
    def scenarios(self) -> dict:
        return self.doc["scenarios"]

    @property
    def figures(self) -> dict:
        return self.doc.get("figures", {})

    @property
    def scenario_doc(self) -> dict:
        return self.scenarios[self.scenario_id]

    @property
    def expect_fail(self) -> bool:
        return bool(self.scenario_doc.get("expect_fail", False))

    @property
    def default_figure(self) -> str:
        if self.figure_id is not None:
            return self.figure_id
        return self.scenario_doc.get("default_figure") or next(
            f for f, d in self.figures.items() if d["scenario"] == self.scenario_id)

    def field(self):
        if "field" not in self._cache:
            net = parse_network(self.network_text)
            self._cache["field"] = eliminate_conservation(net, self.doc["eliminate"])
        return self._cache["field"]

    def figure_doc(self, figure: str | None = None) -> dict:
        figure = figure or self.default_figure
        if figure not in self.figures:
            raise FixtureError(f"fixture {self.id!r} has no figure {figure!r}; "
                               f"known: {', '.join(self.figures)}")
        return self.figures[figure]

    def scenario_dict(self, figure: str | None = None, params: Mapping | None = None) -> dict:
        figure = figure or self.default_figure
        fig = self.figure_doc(figure)
        # an explicitly chosen non-default scenario reuses figure parameters
        scen_id = fig["scenario"]
        if self.scenario_id != self.doc["default_scenario"]:
            scen_id = self.scenario_id
        sd = self.scenarios[scen_id]
        box = dict(sd["box"])
        box.update(fig.get("box", {}))
        doc = {
            "params": dict(params if params is not None else fig["params"]),
            "ray": sd["ray"], "s": sd["s"], "chart": sd["chart"], "box": box,
            "name": f"{self.doc['id']}.{scen_id}/{figure}",
            "observed": sd.get("observed"), "reduced": sd.get("reduced"),
            "extras": fig.get("extras", {}),
        }
        for k in ("eps", "eps_max", "horizon"):
            if k in sd:
                doc[k] = sd[k]
            if k in fig:
                doc[k] = fig[k]
        return doc

    def scenario(self, figure: str | None = None, eps: tuple[float, ...] | None = None,
                 params: Mapping | None = None) -> Scenario:
        key = (figure or self.default_figure, None if params is None else tuple(sorted(params.items())))
        if key not in self._cache:
            self._cache[key] = scenario_from_dict(self.scenario_dict(figure, params),
                                                  field=self.field())
        sc = self._cache[key]
        return sc if eps is None else sc.with_schedule(eps)

    def expected(self, figure: str | None = None) -> dict[str, float]:
        return {k: float(v) for k, v in self.figure_doc(figure).get("expected", {}).items()}

    def in_criterion1(self, figure: str) -> bool:
        fig = self.figure_doc(figure)
        return bool(fig.get("expected")) and fig.get("criterion1", True)

    def check_expected(self, figure: str | None = None, grid: int = 101,
                       rtol: float = EXPECTED_RTOL) -> list[ExpectedCheck]:
        return check_expected(self, figure, grid, rtol)


def _fixture_path(stem: str) -> Path:
    return FIXTURE_DIR / f"{stem}.json"


@lru_cache(maxsize=None)
def _read(stem: str) -> dict:
    path = _fixture_path(stem)
    if not path.is_file():
        raise FixtureError(f"unknown fixture {stem!r}")
    return json.loads(path.read_text())


def list_fixtures() -> list[str]:
    """All addressable fixture ids, shorthands included."""
    ids = set(SHORTHANDS)
    for path in FIXTURE_DIR.glob("*.json"):
        doc = _read(path.stem)
        ids.add(doc["id"])
        for scen in doc["scenarios"]:
            if scen != doc["default_scenario"]:
                ids.add(f"{doc['id']}.{scen}")
    return sorted(ids)


def load_fixture(fixture_id: str) -> Fixture:
    """Resolve a fixture id to its JSON document and scenario."""
    if fixture_id in SHORTHANDS:
        stem, scen, fig = SHORTHANDS[fixture_id]
    elif _fixture_path(fixture_id).is_file():
        stem, scen, fig = fixture_id, None, None
    else:
        stem, _, scen = fixture_id.rpartition(".")
        fig = None
        if not stem or not _fixture_path(stem).is_file():
            raise FixtureError(f"unknown fixture {fixture_id!r}; known: {', '.join(list_fixtures())}")
    doc = _read(stem)
    scen = scen or doc["default_scenario"]
    if scen not in doc["scenarios"]:
        raise FixtureError(f"fixture {stem!r} has no scenario {scen!r}")
    return Fixture(fixture_id, doc, _fixture_path(stem), scen, fig)


def scenario_for_point(fixture_id: str, point: Mapping[str, float],
                       scenario: str | None = None) -> Scenario:
    """Catalog scenario of a fixture evaluated at an arbitrary parameter point."""
    fx = load_fixture(fixture_id if scenario is None else f"{fixture_id}.{scenario}")
    fig = next(f for f, d in fx.figures.items() if d["scenario"] == fx.scenario_id)
    return scenario_from_dict(
        {**fx.scenario_dict(fig, params=point), "extras": {}}, field=fx.field())


def check_expected(fx: Fixture, figure: str | None = None, grid: int = 101,
                   rtol: float = EXPECTED_RTOL) -> list[ExpectedCheck]:
    """Compare stored figure values with the params module.

    Values with a box-supremum counterpart use the generic route; the
    remaining names are closed-form bounds and are evaluated from the catalog.
    """
    figure = figure or fx.default_figure
    fig = fx.figure_doc(figure)
    expected = fx.expected(figure)
    mism = fig.get("known_mismatch", {})
    sc = fx.scenario(figure)
    point = sc.point_dict(1.0)
    point.update(sc.extras)
    out = []
    generic = None
    cat = closed_forms(fx.closed_form_id, point)
    for name, value in expected.items():
        if name in GENERIC:
            if generic is None:
                generic = analyze(sc, grid)
            got = getattr(generic, GENERIC[name])
            route = f"generic:{GENERIC[name]}"
        elif name in cat:
            got, route = cat[name], f"closed:{name}"
        else:
            got, route = float("nan"), "unavailable"
        out.append(ExpectedCheck(fx.doc["id"], figure, name, value,
                                 float("nan") if got is None else float(got), route, rtol,
                                 mism.get(name)))
    return out
