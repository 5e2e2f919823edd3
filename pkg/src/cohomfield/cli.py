"""cohomfield command line: classify, solve, contact, verify, render.

Machine-readable output is JSON lines on stdout; human-readable summaries
go to stderr.  Exit codes: 0 success, 2 bad input, 3 computation failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import config as config_mod
from . import scenarios
from .chart import Mode, verify_inseparable
from .errors import CohomError, ExprSyntaxError, ScenarioParseError, UnknownScenario, ValidationError
from .expr import parse
from .field import Box, ScalarField, area_density
from .germ import INDETERMINATE, classify_equation

EXIT_OK, EXIT_INPUT, EXIT_COMPUTE = 0, 2, 3


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    scenario: "scenarios.Scenario"
    g: Optional[ScalarField]
    g_text: str
    mode: Mode
    grid: Tuple[int, int]
    out: Optional[str]
    settings: config_mod.Settings
    extra: dict = field(default_factory=dict)


def _emit(record: dict, stream=None) -> None:
    stream = stream or sys.stdout
    stream.write(json.dumps(_clean(record), sort_keys=True, default=_jsonable, allow_nan=False) + "\n")


def _clean(v):
    """Non-finite floats become null so every line is strict JSON."""
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    return v


def _jsonable(v):
    if v is INDETERMINATE:
        return "Indeterminate"
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return str(v)


def _say(msg: str) -> None:
    sys.stderr.write(msg + "\n")


def _tri(v) -> object:
    return "Indeterminate" if v is INDETERMINATE else v


def _parse_grid(text: str) -> Tuple[int, int]:
    try:
        nx, ny = (int(v) for v in text.split(","))
    except ValueError:
        raise InputError(f"--grid expects NX,NY, got {text!r}") from None
    if nx < 1 or ny < 1:
        raise InputError(f"--grid needs positive sizes, got {nx}x{ny}")
    return nx, ny


def _parse_floats(text: str, name: str, n: Optional[int] = None) -> List[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"{name} expects comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise InputError(f"{name} expects {n} numbers")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cohomfield", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--scenario", help="built-in scenario: " + ", ".join(scenarios.BUILTIN_NAMES))
        src.add_argument("--file", help="scenario file")
        sp.add_argument("--config", help="settings file with [integrator], [germ], [solve] sections")
        sp.add_argument("--out", help="output path")

    c = sub.add_parser("classify", help="decide C^r / W^{l,p} solvability of L f = g")
    common(c)
    c.add_argument("--g", default="1", help="right-hand side expression in x, y")
    c.add_argument("--mode", choices=["xi", "xiprime"], default="xi")
    c.add_argument("--l", default="0,1", help="Sobolev orders to report")
    c.add_argument("--p", default="1,2", help="Sobolev exponents to report")

    s = sub.add_parser("solve", help="solve on a grid by characteristics and write CSV")
    common(s)
    s.add_argument("--g", default="1")
    s.add_argument("--mode", choices=["xi", "xiprime"], default="xi")
    s.add_argument("--grid", default="21,21", help="NX,NY")
    s.add_argument("--window", help="x0,x1,y0,y1 (default: the scenario's view)")
    s.add_argument("--seed-level", type=float, help="G-value of the seed leaf (default: b of the first pair)")
    s.add_argument("--seed-phi", default="0", help="seed values as an expression in x = F")
    s.add_argument("--figure", help="also render the solution to this SVG file")

    k = sub.add_parser("contact", help="contact exponent of each separatrix pair")
    common(k)
    k.add_argument("--reverse", action="store_true", help="exchange the roles of the two transversals")
    k.add_argument("--etas", default="1e-2,1e-5,12", help="first,last,count of the geometric offsets")

    v = sub.add_parser("verify", help="audit a scenario and check its separatrix pairs")
    common(v)

    r = sub.add_parser("render", help="phase portrait as SVG")
    common(r)
    return p


def _load_run(args) -> RunConfig:
    if args.file:
        try:
            sc = scenarios.load(args.file)
        except OSError as exc:
            raise InputError(f"cannot read {args.file}: {exc}") from None
    else:
        sc = scenarios.builtin(args.scenario or "ham-strip")
    settings = config_mod.load(args.config) if args.config else config_mod.Settings()
    g_text = getattr(args, "g", "1")
    g = ScalarField(parse(g_text)) if hasattr(args, "g") else None
    mode = Mode(getattr(args, "mode", "xi"))
    grid = _parse_grid(args.grid) if hasattr(args, "grid") else (0, 0)
    return RunConfig(args.command, sc, g, g_text, mode, grid, args.out, settings)


# -- commands ---------------------------------------------------------------------

def cmd_classify(run: RunConfig, args) -> int:
    ls = [int(v) for v in _parse_floats(args.l, "--l")]
    ps = _parse_floats(args.p, "--p")
    if any(l < 0 for l in ls) or any(p < 1 for p in ps):
        raise InputError("need l >= 0 and p >= 1")
    if not run.scenario.pairs:
        raise InputError(f"scenario {run.scenario.name!r} declares no separatrix pair")
    v = classify_equation(run.scenario, run.g, run.mode, p_list=ps, l_list=ls, config=run.settings.germ)
    for i, pv in enumerate(v.pairs):
        rec = {"record": "pair", "index": i, "a": pv.pair.a, "b": pv.pair.b}
        if pv.germ is None:
            rec.update(error=pv.error)
        else:
            gc = pv.germ
            rec.update(r_hat=gc.r_hat, beta_hat=gc.beta_hat, log_flag=gc.log_flag, fit_r2=gc.fit_r2,
                       sobolev={f"W{l},{p:g}": _tri(gc.sobolev(l, p)) for l in ls for p in ps})
        _emit(rec)
    sob = {f"W{l},{p:g}": _tri(val) for (l, p), val in v.sobolev.items()}
    indeterminate = any(val == "Indeterminate" for val in sob.values())
    _emit({"record": "verdict", "scenario": run.scenario.name, "g": run.g_text, "mode": run.mode.value,
           "label": v.label, "r_hat": v.r_hat, "c0": v.c0, "sobolev": sob, "unknown": v.unknown,
           "indeterminate": indeterminate})
    c_part = f"C^{v.r_hat} solutions" if v.r_hat is not None else "no C^0 solution"
    l1 = sob.get("W0,1")
    _say(f"{run.scenario.name}: L f = {run.g_text} ({run.mode.value}): {c_part}; "
         f"L^1_loc: {l1}; criteria {v.label}" + ("; some verdicts indeterminate" if indeterminate else ""))
    return EXIT_COMPUTE if v.unknown else EXIT_OK


def cmd_solve(run: RunConfig, args) -> int:
    from .solver import SeedData, Status, residual_check, solve_on_grid
    sc = run.scenario
    window = Box(*_parse_floats(args.window, "--window", 4)) if args.window else sc.view
    level = args.seed_level
    if level is None:
        level = sc.pairs[0].b if sc.pairs else 0.0
    seed = SeedData(level, parse(args.seed_phi))
    nx, ny = run.grid
    cfg = run.settings
    grid = solve_on_grid(sc, run.g, run.mode, seed, window, nx, ny, cfg.solve.mask_distance, cfg.integrator,
                         cfg.solve.t_max)
    residual_check(sc, grid, run.g, run.mode, seed, cfg.solve.residual_step, cfg.integrator)
    out = open(run.out, "w", newline="", encoding="utf-8") if run.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["x", "y", "f", "status"])
        for i, j, (x, y) in grid.points():
            st = grid.status[i][j]
            f = "" if st is Status.Unreachable else repr(float(grid.values[i, j]))
            w.writerow([repr(x), repr(y), f, st.value])
    finally:
        if run.out:
            out.close()
    if args.figure:
        from .plotting import render_solution
        render_solution(grid, args.figure, title=f"{sc.name}: L f = {run.g_text}")
    mx, mean = grid.residual_stats
    _emit({"record": "residual", "max": mx, "mean": mean, "masked_fraction": grid.masked_fraction,
           "unreachable_fraction": grid.unreachable_fraction}, sys.stderr)
    return EXIT_OK


def cmd_contact(run: RunConfig, args) -> int:
    from .solver import contact_exponent
    first, last, count = _parse_floats(args.etas, "--etas", 3)
    if not (first > 0 and last > 0 and count >= 2):
        raise InputError("--etas needs positive offsets and at least two samples")
    etas = np.geomspace(first, last, int(count))
    if not run.scenario.pairs:
        raise InputError(f"scenario {run.scenario.name!r} declares no separatrix pair")
    failed = False
    for i, pair in enumerate(run.scenario.pairs):
        try:
            alpha, r2 = contact_exponent(run.scenario, pair, etas, reverse=args.reverse)
            _emit({"record": "contact", "index": i, "alpha_hat": alpha, "fit_r2": r2, "reverse": args.reverse})
            _say(f"pair {i}: alpha = {alpha:.4f} (R^2 {r2:.6f})")
        except CohomError as exc:
            failed = True
            _emit({"record": "contact", "index": i, "error": f"{type(exc).__name__}: {exc}"})
    return EXIT_COMPUTE if failed else EXIT_OK


def cmd_verify(run: RunConfig, args) -> int:
    sc = run.scenario
    failures = scenarios.audit(sc)
    from .field import audit_regularity
    reg = audit_regularity(sc.xi, sc.F, sc.view)
    _emit({"record": "audit", "scenario": sc.name, "failures": failures, "min_speed_sq": reg.min_speed_sq,
           "min_grad_F": reg.min_grad_F, "degeneracy_locus": len(reg.degeneracy_locus)})
    ok = not failures
    for i, pair in enumerate(sc.pairs):
        rep = verify_inseparable(sc, pair, [10.0 ** -k for k in range(1, 7)])
        _emit({"record": "inseparable", "index": i, "ok": rep.ok, "converging": rep.converging,
               "errors": [c.error for c in rep.checks if c.error]})
        ok = ok and rep.ok
    _say(f"{sc.name}: {'ok' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_COMPUTE


def cmd_render(run: RunConfig, args) -> int:
    from .plotting import render_portrait
    out = run.out or f"{run.scenario.name}.svg"
    render_portrait(run.scenario, out)
    _emit({"record": "render", "path": out, "separatrix_pairs": len(run.scenario.pairs)})
    return EXIT_OK


COMMANDS = {"classify": cmd_classify, "solve": cmd_solve, "contact": cmd_contact, "verify": cmd_verify,
            "render": cmd_render}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        run = _load_run(args)
        return COMMANDS[args.command](run, args)
    except ExprSyntaxError as exc:
        _emit({"record": "error", "kind": "syntax", "message": str(exc), "offset": exc.offset,
               "expected": sorted(exc.expected)})
        _say(f"error: {exc}")
        return EXIT_INPUT
    except (InputError, UnknownScenario, ScenarioParseError, ValidationError, ValueError) as exc:
        _emit({"record": "error", "kind": "input", "message": str(exc)})
        _say(f"error: {exc}")
        return EXIT_INPUT
    except CohomError as exc:
        _emit({"record": "error", "kind": type(exc).__name__, "message": str(exc)})
        _say(f"error: {exc}")
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
