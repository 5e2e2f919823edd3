"""Built-in example fields, the scenario text format and the Gaussian
hypergeometric function needed by one of the closed-form oracles."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import numpy as np

from . import quadrature
from .chart import Mode, SeparatrixPair, Side
from .errors import (DegenerateTransversal, DomainFault, ParameterOutOfRange, ScenarioParseError,
                     UnknownScenario, ValidationError)
from .expr import Expr, parse, to_text
from .field import (AUDIT_RANDOM, AUDIT_THRESHOLD, Box, Component, PlaneVectorField, ScalarField,
                    audit_regularity, derived_fields)

FIRST_INTEGRAL_TOL = 1e-9


@dataclass(frozen=True)
class KnownPair:
    """A closed-form pair with L f = g.  ``frame`` is "plane" (g, f in x, y
    and ``mode`` selects L_xi or L_xi'_F) or "chart" (d f/dy' = g in chart
    coordinates, written with x, y standing for x', y')."""

    g: Expr
    f: Expr
    mode: Mode = Mode.Xi
    frame: str = "plane"


@dataclass
class Scenario:
    name: str
    xi: PlaneVectorField
    F: ScalarField
    G: ScalarField
    hamiltonian: bool
    pairs: List[SeparatrixPair]
    box: Box
    known: List[KnownPair] = field(default_factory=list)
    image_predicate: Optional[Expr] = None
    view: Optional[Box] = None

    def __post_init__(self):
        if self.view is None:
            self.view = self.box

    @property
    def image_test(self) -> Optional[Callable[[float, float], bool]]:
        if self.image_predicate is None:
            return None
        fn = self.image_predicate.value_fn()

        def test(xp, yp):
            try:
                return fn(xp, yp) > 0
            except DomainFault:
                return False
        return test

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return dumps(self) == dumps(other)


# -- the piecewise first integral of the non-translation example -----------

def _atan_F(x, y):
    if x < 0:
        return math.atan(y * y - 1.0 / x)
    if x == 0:
        return 0.5 * math.pi
    return math.atan(y * y - 1.0 / x) + math.pi


def _atan_F_dual(x, y):
    D = x * x + (1.0 - x * y * y) ** 2
    return _atan_F(x, y), 1.0 / D, 2.0 * y * x * x / D


CUSTOM_COMPONENTS = {
    "nontranslation": lambda: Component(_atan_F, _atan_F_dual, label="builtin:nontranslation"),
}


def _scalar(text: str, regular=False) -> ScalarField:
    if text.startswith("builtin:"):
        key = text.split(":", 1)[1]
        if key not in CUSTOM_COMPONENTS:
            raise UnknownScenario(f"no built-in function {key!r}")
        return ScalarField(CUSTOM_COMPONENTS[key](), regular=regular)
    return ScalarField(parse(text), regular=regular)


# -- builtins ------------------------------------------------------------------

_STRIP_IMAGE = "abs(y)+abs(x)-x"

THREE_SEPS_P = ("2*y*exp(x)*(3*(1+exp(x)*y^2)^2-exp(x)*(6-19*exp(x)+22*exp(x)*y^2))"
                "/(3+2*exp(x)*(5+3*y^2)+3*exp(2*x)*(1-y^2)^2)")
THREE_SEPS_F = "(1-(y-2)^2-exp(-x))*(1-y^2-exp(-x))*(1-(y+2)^2-exp(-x))"


def _known(g, f, mode=Mode.Xi, frame="plane"):
    return KnownPair(parse(g), parse(f), mode, frame)


def _ham_strip():
    return Scenario(
        name="ham-strip",
        xi=PlaneVectorField(parse("2*y"), parse("1-y^2")),
        F=ScalarField(parse("(y^2-1)*exp(x)"), regular=True),
        G=ScalarField(parse("-2*y*exp(x)"), regular=True),
        hamiltonian=True,
        pairs=[SeparatrixPair(0.0, 0.0, -1.0, 1.0, Side.Left, (0.0, 0.0))],
        box=Box(-30.0, 6.0, -3.0, 3.0),
        view=Box(-4.0, 2.0, -3.0, 3.0),
        image_predicate=parse(_STRIP_IMAGE),
        known=[
            _known("1", "0.5*ln(abs((1+y)/(1-y)))"),
            _known("0", "x+ln(abs(1-y^2))"),
            _known("exp(-x)/(1+y^2)", "x+2*ln(abs(1-y))", Mode.XiPrime),
            _known("1/sqrt(x^2+y^2)", "ln(sqrt(x^2+y^2)+y)", frame="chart"),
        ],
    )


def _nonham_strip():
    return Scenario(
        name="nonham-strip",
        xi=PlaneVectorField(parse("2*(2*y-1)"), parse("1-y^2")),
        F=ScalarField(parse("(y+1)^3*(y-1)*exp(x)"), regular=False),
        G=ScalarField(parse("(2*y-1)*exp(x)"), regular=True),
        hamiltonian=False,
        pairs=[SeparatrixPair(0.0, 0.0, -1.0, 1.0, Side.Left, (0.0, 0.25))],
        box=Box(-30.0, 6.0, -3.0, 3.0),
        view=Box(-4.0, 2.0, -3.0, 3.0),
        image_predicate=parse(_STRIP_IMAGE),
        known=[
            _known("cbrt(x)*(y-sqrt(x^2+y^2))^2",
                   "cbrt(x)*(x^2*y+2/3*y^3-2/3*(x^2+y^2)^(3/2))", frame="chart"),
        ],
    )


def _nontranslation():
    return Scenario(
        name="nontranslation",
        xi=PlaneVectorField(parse("2*x^2*y"), parse("-1")),
        F=_scalar("builtin:nontranslation", regular=True),
        G=ScalarField(parse("y"), regular=True),
        hamiltonian=True,
        pairs=[SeparatrixPair(math.pi, 0.0, -1.0, 1.0, Side.Left, (1.0, 0.0))],
        box=Box(-10.0, 1e10, -4.0, 4.0),
        view=Box(-3.0, 3.0, -3.0, 3.0),
        image_predicate=parse("(x-atan(y^2))*(atan(y^2)+pi-x)"),
    )


def _three_seps():
    return Scenario(
        name="three-seps",
        xi=PlaneVectorField(parse(THREE_SEPS_P), parse("1")),
        F=ScalarField(parse(THREE_SEPS_F), regular=True),
        G=ScalarField(parse("y"), regular=True),
        hamiltonian=True,
        pairs=[SeparatrixPair(0.0, -1.0, -2.0, 0.0, Side.Left, (0.0, -1.0)),
               SeparatrixPair(0.0, 1.0, 0.0, 2.0, Side.Left, (0.0, 1.0))],
        box=Box(-5.0, 40.0, -5.0, 5.0),
        view=Box(-2.0, 4.0, -4.0, 4.0),
        image_predicate=parse("(1-(y-2)^2)*(1-y^2)*(1-(y+2)^2)-x"),
    )


_BUILTINS = {
    "ham-strip": _ham_strip,
    "nonham-strip": _nonham_strip,
    "nontranslation": _nontranslation,
    "three-seps": _three_seps,
}

BUILTIN_NAMES = tuple(_BUILTINS)


def builtin(name: str) -> Scenario:
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise UnknownScenario(f"unknown scenario {name!r}; choose from {', '.join(BUILTIN_NAMES)}") from None


def chart_scenario() -> Scenario:
    """The chart plane itself: xi = d/dy, F = x, G = y.

    Solving on it integrates a chart-side right-hand side along vertical
    lines, which is how chart-side closed forms are checked.
    """
    return Scenario(
        name="chart",
        xi=PlaneVectorField(parse("0"), parse("1")),
        F=ScalarField(parse("x"), regular=True),
        G=ScalarField(parse("y"), regular=True),
        hamiltonian=True,
        pairs=[],
        box=Box(-10.0, 10.0, -10.0, 10.0),
    )


# -- validation ---------------------------------------------------------------

def audit(scenario: Scenario, seed: int = 0) -> List[str]:
    """Return the list of failed audits (empty when the scenario is sound)."""
    failures = []
    box = scenario.view
    reg = audit_regularity(scenario.xi, scenario.F, box, seed=seed)
    if not reg.field_regular:
        failures.append(f"field not regular: min |xi|^2 = {reg.min_speed_sq:.3g}")
    if scenario.F.regular and not reg.F_regular:
        failures.append(f"F claimed regular but min |grad F| = {reg.min_grad_F:.3g}")
    if reg.field_regular:
        rng = np.random.default_rng(seed)
        worst = 0.0
        for x, y in box.random(AUDIT_RANDOM, rng):
            try:
                P, Q = scenario.xi(x, y)
                Fx, Fy = scenario.F.grad(x, y)
            except DomainFault:
                continue
            scale = math.hypot(P, Q) * math.hypot(Fx, Fy)
            if scale > 0:
                worst = max(worst, abs(P * Fx + Q * Fy) / scale)
        if worst > FIRST_INTEGRAL_TOL:
            failures.append(f"F is not a first integral: relative |L_xi F| up to {worst:.3g}")
        try:
            derived_fields(scenario.xi, scenario.F, scenario.G, box, seed=seed)
        except DegenerateTransversal as exc:
            failures.append(str(exc))
    for i, pair in enumerate(scenario.pairs):
        for p in pair.check_anchor(scenario.F, scenario.G):
            failures.append(f"separatrix {i}: {p}")
    return failures


def validate(scenario: Scenario) -> Scenario:
    failures = audit(scenario)
    if failures:
        raise ValidationError(failures)
    return scenario


# -- file format ----------------------------------------------------------------

_ALLOWED = {
    "scenario": {"name", "xi", "F", "G", "regular", "hamiltonian", "box", "view", "image"},
    "separatrix": {"a", "b", "b1", "b2", "side", "anchor"},
    "known": {"g", "f", "mode", "frame"},
}


def _floats(sec, key, n):
    vals = sec.items(key)
    if len(vals) != n:
        raise ScenarioParseError(f"{key} expects {n} numbers, got {len(vals)}", sec.line_of(key))
    try:
        return [float(parse(v).eval(0.0, 0.0)) for v in vals]
    except Exception as exc:
        raise ScenarioParseError(f"bad number in {key}: {exc}", sec.line_of(key)) from None


def _expr(sec, key):
    text = sec.one(key)
    try:
        return parse(text)
    except Exception as exc:
        raise ScenarioParseError(f"{key}: {exc}", sec.line_of(key)) from None


def _bool(sec, key):
    v = sec.one(key).lower()
    if v not in ("true", "false"):
        raise ScenarioParseError(f"{key} must be true or false", sec.line_of(key))
    return v == "true"


def _need(sec, keys):
    for k in keys:
        if k not in sec.entries:
            raise ScenarioParseError(f"[{sec.name}] is missing {k!r}", sec.line)


def loads(text: str, check: bool = True) -> Scenario:
    from .textformat import parse_sections
    sections = parse_sections(text, _ALLOWED)
    heads = [s for s in sections if s.name == "scenario"]
    if len(heads) != 1:
        raise ScenarioParseError("exactly one [scenario] section required", heads[1].line if heads else 1)
    head = heads[0]
    _need(head, ["name", "xi", "F", "G", "box"])
    xs = head.items("xi")
    if len(xs) != 2:
        raise ScenarioParseError("xi expects two expressions", head.line_of("xi"))
    try:
        xi = PlaneVectorField(parse(xs[0]), parse(xs[1]))
    except Exception as exc:
        raise ScenarioParseError(f"xi: {exc}", head.line_of("xi")) from None
    try:
        F = _scalar(head.one("F"))
        G = _scalar(head.one("G"))
    except (ScenarioParseError, UnknownScenario):
        raise
    except Exception as exc:
        raise ScenarioParseError(f"F/G: {exc}", head.line_of("F")) from None
    hamiltonian = _bool(head, "hamiltonian") if "hamiltonian" in head.entries else True
    box = Box(*_floats(head, "box", 4))
    view = Box(*_floats(head, "view", 4)) if "view" in head.entries else None
    image = _expr(head, "image") if "image" in head.entries else None

    pairs, known = [], []
    for sec in sections:
        if sec.name == "separatrix":
            _need(sec, ["a", "b", "b1", "b2", "side", "anchor"])
            side = sec.one("side").lower()
            if side not in ("left", "right"):
                raise ScenarioParseError("side must be left or right", sec.line_of("side"))
            a, = _floats(sec, "a", 1)
            b, = _floats(sec, "b", 1)
            b1, = _floats(sec, "b1", 1)
            b2, = _floats(sec, "b2", 1)
            anchor = tuple(_floats(sec, "anchor", 2))
            try:
                pairs.append(SeparatrixPair(a, b, b1, b2, Side(side), anchor))
            except ValueError as exc:
                raise ScenarioParseError(str(exc), sec.line) from None
        elif sec.name == "known":
            _need(sec, ["g", "f"])
            mode = sec.one("mode").lower() if "mode" in sec.entries else "xi"
            if mode not in ("xi", "xiprime"):
                raise ScenarioParseError("mode must be xi or xiprime", sec.line_of("mode"))
            frame = sec.one("frame").lower() if "frame" in sec.entries else "plane"
            if frame not in ("plane", "chart"):
                raise ScenarioParseError("frame must be plane or chart", sec.line_of("frame"))
            known.append(KnownPair(_expr(sec, "g"), _expr(sec, "f"), Mode(mode), frame))

    F.regular = _bool(head, "regular") if "regular" in head.entries else False
    sc = Scenario(head.one("name"), xi, F, G, hamiltonian, pairs, box, known, image, view)
    return validate(sc) if check else sc


def load(path, check: bool = True) -> Scenario:
    return loads(Path(path).read_text(encoding="utf-8"), check=check)


def _fmt(v: float) -> str:
    return repr(float(v))


def dumps(sc: Scenario) -> str:
    from .textformat import quote
    lines = ["[scenario]",
             f"name = {sc.name}",
             f"xi = {quote(str(sc.xi.P))}, {quote(str(sc.xi.Q))}",
             f"F = {quote(str(sc.F))}",
             f"G = {quote(str(sc.G))}",
             f"regular = {'true' if sc.F.regular else 'false'}",
             f"hamiltonian = {'true' if sc.hamiltonian else 'false'}",
             "box = " + ", ".join(_fmt(v) for v in sc.box.as_tuple())]
    if sc.view is not None and sc.view != sc.box:
        lines.append("view = " + ", ".join(_fmt(v) for v in sc.view.as_tuple()))
    if sc.image_predicate is not None:
        lines.append(f"image = {quote(to_text(sc.image_predicate))}")
    for p in sc.pairs:
        lines += ["", "[separatrix]", f"a = {_fmt(p.a)}", f"b = {_fmt(p.b)}", f"b1 = {_fmt(p.b1)}",
                  f"b2 = {_fmt(p.b2)}", f"side = {p.side.value}",
                  f"anchor = {_fmt(p.anchor[0])}, {_fmt(p.anchor[1])}"]
    for k in sc.known:
        lines += ["", "[known]", f"g = {quote(to_text(k.g))}", f"f = {quote(to_text(k.f))}",
                  f"mode = {k.mode.value}", f"frame = {k.frame}"]
    return "\n".join(lines) + "\n"


def save(sc: Scenario, path) -> None:
    Path(path).write_text(dumps(sc), encoding="utf-8")


# -- Gaussian hypergeometric function ------------------------------------------

def hyp2f1_series(a: float, b: float, c: float, z: float, tol: float = 1e-17) -> float:
    if abs(z) >= 1:
        raise ParameterOutOfRange("the power series needs |z| < 1")
    term, total, n = 1.0, 1.0, 0
    while abs(term) > tol * abs(total):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1)) * z
        total += term
        n += 1
        if n > 10000:
            break
    return total


def hyp2f1(a: float, b: float, c: float, z: float) -> float:
    """2F1(a, b; c; z) for c > b > 0 and z <= 0 from the Euler integral.

    The endpoint singularities of t^(b-1) (1-t)^(c-b-1) are removed by the
    substitutions t = u^(1/b) on [0, 1/2] and 1 - t = s^(1/(c-b)) on [1/2, 1].
    """
    if not (c > b > 0):
        raise ParameterOutOfRange(f"Euler integral needs c > b > 0, got b={b}, c={c}")
    if z > 0:
        raise ParameterOutOfRange(f"z must be <= 0, got {z}")
    if z == 0:
        return 1.0
    e = c - b

    def left(u):
        t = u ** (1.0 / b)
        return (1.0 - t) ** (e - 1.0) * (1.0 - z * t) ** (-a) / b

    def right(s):
        t = 1.0 - s ** (1.0 / e)
        return t ** (b - 1.0) * (1.0 - z * t) ** (-a) / e

    # scale of the (1 - z t)^(-a) factor, to help the first partition
    knee = min(0.5, 1.0 / abs(z))
    I1, _ = quadrature.integrate(left, 0.0, 0.5 ** b, abs_tol=1e-16, rel_tol=1e-14,
                                 breakpoints=[knee ** b * 0.5 ** k for k in range(0, 40, 4)])
    I2, _ = quadrature.integrate(right, 0.0, 0.5 ** e, abs_tol=1e-16, rel_tol=1e-14)
    beta = math.exp(math.lgamma(b) + math.lgamma(e) - math.lgamma(c))
    return (I1 + I2) / beta


def hyp_fhat(xp: float, yp: float) -> float:
    """Chart-side solution of d f/dy' = ((x')^2 + (y')^2)^(-1/4) vanishing on y' = 0.

    Equals |x'|^(-1/2) y' (1 + y'^2/x'^2)^(3/4) 2F1(1, 5/4, 3/2; -y'^2/x'^2):
    the integral of (1 + u^2)^(-1/4) is s 2F1(1/4, 1/2; 3/2; -s^2), and
    Euler's transformation turns it into the form above.
    """
    s2 = (yp / xp) ** 2
    return yp * (1.0 + s2) ** 0.75 * hyp2f1(1.0, 1.25, 1.5, -s2) / math.sqrt(abs(xp))


def hyp_fhat_uncorrected(xp: float, yp: float) -> float:
    """The same expression without the |x'|^(-1/2) factor."""
    s2 = (yp / xp) ** 2
    return yp * (1.0 + s2) ** 0.75 * hyp2f1(1.0, 1.25, 1.5, -s2)
