"""Command-line front end: ``tfpv-lab <command> [flags]``.

Exit codes: 0 success, 1 domain error (verification failure, degenerate
point, integration failure), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import FixtureError, list_fixtures, load_fixture
from .lyap import CONVENTIONS, LyapError, long_term_check, lyap_estimate
from .params import ClosedFormError, analyze
from .reduce import ProjectorError, cascade_reduction, reduce_numeric
from .scenario import Scenario, ScenarioError, load_scenario, verify_tfpv
from .sim import IntegrationError, compare, default_jobs, fmt, integrate, reduced_for, three_timescale_run

DOMAIN_ERRORS = (ScenarioError, IntegrationError, ProjectorError, ClosedFormError, LyapError)


class UsageError(Exception):
    pass


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, out: str | None) -> None:
    _emit(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n", out)


def _eps_list(text: str | None) -> list[float] | None:
    if text is None:
        return None
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--eps expects comma separated numbers, got {text!r}") from None
    if not vals or any(not math.isfinite(v) or v <= 0 for v in vals):
        raise UsageError(f"--eps values must be positive, got {text!r}")
    return vals


def _scenario(args) -> tuple[Scenario, str | None, object]:
    """Scenario, closed-form network id and fixture (if any) from the flags."""
    if args.scenario and args.fixture:
        raise UsageError("give either --fixture or --scenario, not both")
    if args.fixture:
        fx = load_fixture(args.fixture)
        sc = fx.scenario(args.figure)
        return sc, args.network or fx.closed_form_id, fx
    if args.scenario:
        return load_scenario(args.scenario), args.network, None
    raise UsageError("a scenario is required: use --fixture (with optional --figure) or --scenario")


# ------------------------------------------------------------------ commands

def cmd_validate(args) -> int:
    sc, _, fx = _scenario(args)
    rep = verify_tfpv(sc, grid=args.grid)
    doc = rep.as_dict()
    if fx is not None:
        doc["expect_fail"] = fx.expect_fail
    _emit_json(doc, args.out)
    if not rep.passed:
        for line in rep.failures[:5]:
            print(f"verification failed: {line}", file=sys.stderr)
        return 1
    return 0


def cmd_analyze(args) -> int:
    sc, net, _ = _scenario(args)
    dp = analyze(sc, grid=args.grid, network_id=net)
    _emit_json(dp.as_dict(), args.out)
    return 0


def cmd_reduce(args) -> int:
    sc, _, _ = _scenario(args)
    if args.sample:
        rng = np.random.default_rng(args.seed)
        lo = np.array([b[1] for b in sc.box])
        hi = np.array([b[2] for b in sc.box])
        U = lo + (hi - lo) * rng.random((args.sample, sc.s))
    else:
        U = sc.grid(args.grid)
    X = sc.embed(U)
    V = reduce_numeric(sc, X)
    rm = reduced_for(sc)
    point = dict(sc.point_dict(1.0), **sc.extras)
    slow = list(sc.slow_index)
    cols = list(sc.chart.slow) + [f"d{u}" for u in sc.chart.slow]
    closed = None
    if rm is not None:
        cols += [f"d{u}_closed" for u in rm.states]
        closed = np.array([rm.rhs(rm.lift(x), point) for x in X])
    if args.format == "json":
        rows = []
        for i, u in enumerate(U):
            row = dict(zip(sc.chart.slow, u))
            row.update({f"d{nm}": V[i, j] for nm, j in zip(sc.chart.slow, slow)})
            if closed is not None:
                row.update({f"d{nm}_closed": closed[i, k] for k, nm in enumerate(rm.states)})
            rows.append(row)
        _emit_json({"scenario": sc.name, "reduced": sc.reduced, "rows": rows}, args.out)
        return 0
    lines = [",".join(cols)]
    for i, u in enumerate(U):
        vals = list(u) + [V[i, j] for j in slow]
        if closed is not None:
            vals += list(closed[i])
        lines.append(",".join(fmt(v) for v in vals))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_simulate(args) -> int:
    sc, _, _ = _scenario(args)
    eps = _eps_list(args.eps) or [1.0]
    if len(eps) != 1:
        raise UsageError("simulate takes a single --eps value")
    e = eps[0]
    point = dict(sc.point_dict(e), **sc.extras)
    t_eval = None
    if args.reduced:
        rm = reduced_for(sc)
        if rm is None:
            raise ScenarioError(f"scenario {sc.name} has no closed-form reduced model")
        f, jac = rm.system(point)
        x0, names = rm.initial(point), rm.states
    else:
        pv = sc.point(e)
        f, jac = sc.field.system(pv)
        x0, names = sc.field.initial_state(pv), sc.field.states
    T = args.T
    if T is None:
        from .sim import horizon_for
        rm = reduced_for(sc)
        if rm is None:
            raise UsageError("give --T for scenarios without a closed-form reduced model")
        T = horizon_for(rm, point, sc.observed_state, args.rtol)
    if args.points:
        t_eval = np.linspace(0.0, T, args.points)
    tr = integrate(f, jac, x0, (0.0, T), rtol=args.rtol, t_eval=t_eval, names=names)
    if args.format == "json":
        _emit_json({"names": tr.names, "t": tr.t, "tau": tr.tau, "y": tr.y, "meta": tr.meta}, args.out)
    else:
        _emit(tr.to_csv(), args.out)
    return 0


def _compare(args, default_eps) -> int:
    sc, _, _ = _scenario(args)
    eps = _eps_list(args.eps) or default_eps(sc)
    rep = compare(sc, eps, rtol=args.rtol, grid=args.grid, jobs=args.jobs,
                  horizon=args.T)
    if args.format == "json":
        _emit_json(rep.as_dict(), args.out)
    else:
        _emit(rep.to_csv(), args.out)
    return 0


def cmd_compare(args) -> int:
    return _compare(args, lambda sc: [1.0])


def cmd_sweep(args) -> int:
    return _compare(args, lambda sc: list(sc.eps_schedule))


def cmd_cascade(args) -> int:
    if not args.fixture and not args.scenario:
        args.fixture = "comp.cascade"
    sc, _, _ = _scenario(args)
    cm = cascade_reduction(dict(sc.point_dict(1.0), **sc.extras))
    rep = three_timescale_run(cm, sc, rtol=args.rtol, horizon=args.T)
    doc = rep.as_dict()
    if args.out:
        base = Path(args.out)
        stem = base.with_suffix("")
        for tag, tr in (("full", rep.full), ("stage1", rep.stage1), ("stage2", rep.stage2)):
            tr.to_csv(f"{stem}_{tag}.csv")
        doc["files"] = [f"{stem}_{tag}.csv" for tag in ("full", "stage1", "stage2")]
        Path(f"{stem}_report.json").write_text(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n")
    _emit_json(doc, None)
    return 0 if rep.stage1_tracks and rep.stage2_tracks else 1


def cmd_lyap(args) -> int:
    vals = {k: getattr(args, k) for k in ("k1", "km1", "k2", "e0", "s0")}
    if any(v is None for v in vals.values()):
        fx = load_fixture(args.fixture or "mm.slowprod")
        p = fx.scenario(args.figure).point_dict(1.0)
        for k, v in vals.items():
            if v is None:
                vals[k] = p[k]
    est = lyap_estimate(**vals, convention=args.convention)
    doc = {"params": vals, "estimate": est.as_dict()}
    if args.long_term:
        doc["long_term"] = long_term_check(**vals, rtol=args.rtol).as_dict()
    _emit_json(doc, args.out)
    return 0


def cmd_fixtures(args) -> int:
    if args.action == "list":
        rows = []
        for fid in list_fixtures():
            fx = load_fixture(fid)
            rows.append({"id": fid, "scenario": fx.scenario_id, "figures": list(fx.figures),
                         "expect_fail": fx.expect_fail})
        if args.format == "csv":
            _emit("id,scenario,expect_fail,figures\n" + "".join(
                f"{r['id']},{r['scenario']},{str(r['expect_fail']).lower()},{' '.join(r['figures'])}\n"
                for r in rows), args.out)
        else:
            _emit_json(rows, args.out)
        return 0
    fx = load_fixture(args.id or args.fixture or "")
    if args.action == "show":
        _emit_json({"id": fx.id, "scenario": fx.scenario_id, "document": fx.doc,
                    "network": fx.network_text}, args.out)
        return 0
    # check
    figs = [args.figure] if args.figure else [f for f in fx.figures if fx.expected(f)]
    checks = [c for f in figs for c in fx.check_expected(f, grid=args.grid)]
    _emit_json([c.as_dict() for c in checks], args.out)
    return 0 if all(c.ok or c.known_mismatch for c in checks) else 1


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--fixture", help="catalog fixture id (see 'fixtures list')")
    common.add_argument("--figure", help="figure parameter set of the fixture")
    common.add_argument("--scenario", help="scenario JSON file or inline JSON")
    common.add_argument("--network", help="closed-form catalog id used for regime flags")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--grid", type=int, default=101, help="grid points per slow axis")
    common.add_argument("--rtol", type=float, default=1e-9)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--eps", help="comma separated eps values")
    common.add_argument("--jobs", type=int, default=default_jobs(),
                        help="worker processes for sweeps (default: $TFPV_LAB_JOBS or 1)")
    common.add_argument("--T", type=float, default=None, help="fixed time horizon")

    p = argparse.ArgumentParser(prog="tfpv-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="verify the TFPV conditions on the box")
    sub.add_parser("analyze", parents=[common], help="distinguished parameters and regime flags")
    r = sub.add_parser("reduce", parents=[common], help="reduced right-hand side on the grid")
    r.add_argument("--sample", type=int, default=0, help="random chart points instead of the grid")
    s = sub.add_parser("simulate", parents=[common], help="integrate the full or reduced system")
    s.add_argument("--reduced", action="store_true")
    s.add_argument("--points", type=int, default=0, help="uniform output points (default: all steps)")
    sub.add_parser("compare", parents=[common], help="full vs reduced at the figure point")
    sub.add_parser("sweep", parents=[common], help="full vs reduced along the eps schedule")
    sub.add_parser("cascade", parents=[common], help="three-timescale run for competitive inhibition")
    ly = sub.add_parser("lyap", parents=[common], help="Lyapunov estimates for slow product formation")
    for k in ("k1", "km1", "k2", "e0", "s0"):
        ly.add_argument(f"--{k}", type=float)
    ly.add_argument("--convention", choices=sorted(CONVENTIONS), default="sqrt2")
    ly.add_argument("--long-term", action="store_true", help="also run the long-term discrepancy check")
    fx = sub.add_parser("fixtures", parents=[common], help="list, show or check fixtures")
    fx.add_argument("action", nargs="?", choices=("list", "show", "check"), default="list")
    fx.add_argument("id", nargs="?")
    return p


COMMANDS = {
    "validate": cmd_validate, "analyze": cmd_analyze, "reduce": cmd_reduce,
    "simulate": cmd_simulate, "compare": cmd_compare, "sweep": cmd_sweep,
    "cascade": cmd_cascade, "lyap": cmd_lyap, "fixtures": cmd_fixtures,
}

DEFAULT_FORMAT = {"validate": "json", "analyze": "json", "lyap": "json", "cascade": "json",
                  "fixtures": "json"}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.format is None:
        args.format = DEFAULT_FORMAT.get(args.command, "csv")
    if args.grid < 2:
        print("tfpv-lab: error: --grid must be at least 2", file=sys.stderr)
        return 2
    if args.jobs < 1:
        print("tfpv-lab: error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"tfpv-lab: error: {exc}", file=sys.stderr)
        return 2
    except FixtureError as exc:
        print(f"tfpv-lab: error: {exc}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        print(f"tfpv-lab: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
