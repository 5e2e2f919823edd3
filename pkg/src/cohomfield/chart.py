"""The normal chart p -> (F(p), G(p)) near a pair of adjacent separatrices:
forward map, damped-Newton inverse, pushforward of right-hand sides and a
numerical check that the chart contains a one-sided strip next to the pair."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import root

from .errors import (CohomError, DegenerateTransversal, DomainFault, NoConvergence, NoCrossing,
                     OnSeparatrix, OutsideImage)
from .field import Box, ScalarField, derived_fields, lie_derivative
from .flow import CrossingEvent, DEFAULT_CONFIG, Direction, IntegratorConfig, Terminal, integrate

if TYPE_CHECKING:
    from .scenarios import Scenario

Point = Tuple[float, float]

NEWTON_MAX_ITER = 60
NEWTON_MAX_HALVINGS = 60
INVERSE_TOL = 1e-10
# Newton stops early once the residual is this far below the acceptance level
NEWTON_TARGET = 1e-14
CACHE_SIZE = 64


class Side(enum.Enum):
    Left = "left"
    Right = "right"

    @property
    def sign(self) -> int:
        return -1 if self is Side.Left else 1


class Mode(enum.Enum):
    Xi = "xi"
    XiPrime = "xiprime"


@dataclass(frozen=True)
class SeparatrixPair:
    """Adjacent separatrices on F = a, separated by the leaf G = b and cut by
    the transversals G = b1 and G = b2."""

    a: float
    b: float
    b1: float
    b2: float
    side: Side
    anchor: Point

    def __post_init__(self):
        if not (self.b1 < self.b < self.b2):
            raise ValueError(f"separatrix pair needs b1 < b < b2, got {self.b1}, {self.b}, {self.b2}")

    def check_anchor(self, F: ScalarField, G: ScalarField) -> List[str]:
        problems = []
        fa = F(*self.anchor)
        if (fa - self.a) * self.side.sign <= 0:
            problems.append(f"anchor {self.anchor} is not on the {self.side.value} side of F = {self.a}")
        ga = G(*self.anchor)
        if not (self.b1 < ga < self.b2):
            problems.append(f"anchor {self.anchor} has G = {ga} outside ({self.b1}, {self.b2})")
        return problems

    def chart_offset(self, delta: float) -> float:
        """F-coordinate at distance ``delta`` from ``a`` on the declared side."""
        return self.a + self.side.sign * delta


def to_chart(F: ScalarField, G: ScalarField, p: Point) -> Point:
    return F(*p), G(*p)


def _newton(F, G, xp, yp, p0, box: Optional[Box]):
    """Damped Newton on (F - xp, G - yp).  Returns (point, residual)."""
    x, y = p0
    try:
        f, fx, fy = F.dual(x, y)
        g, gx, gy = G.dual(x, y)
    except DomainFault:
        return None, math.inf
    r1, r2 = f - xp, g - yp
    res = max(abs(r1), abs(r2))
    floor = NEWTON_TARGET * max(1.0, abs(xp), abs(yp))
    for _ in range(NEWTON_MAX_ITER):
        if res <= floor:
            break
        det = fx * gy - fy * gx
        if det == 0.0 or not math.isfinite(det):
            break
        dx = -(gy * r1 - fy * r2) / det
        dy = -(-gx * r1 + fx * r2) / det
        lam = 1.0
        improved = False
        for _ in range(NEWTON_MAX_HALVINGS):
            nx, ny = x + lam * dx, y + lam * dy
            if box is None or box.contains(nx, ny):
                try:
                    nf, nfx, nfy = F.dual(nx, ny)
                    ng, ngx, ngy = G.dual(nx, ny)
                    nres = max(abs(nf - xp), abs(ng - yp))
                except DomainFault:
                    nres = math.inf
                if nres < res:
                    improved = True
                    break
            lam *= 0.5
        if not improved:
            break
        x, y = nx, ny
        f, fx, fy, g, gx, gy = nf, nfx, nfy, ng, ngx, ngy
        r1, r2 = f - xp, g - yp
        res = nres
    return (x, y), res


def _levenberg_marquardt(F, G, xp, yp, p0):
    def fun(v):
        return [F(v[0], v[1]) - xp, G(v[0], v[1]) - yp]

    def jac(v):
        return [list(F.grad(v[0], v[1])), list(G.grad(v[0], v[1]))]
    try:
        sol = root(fun, p0, jac=jac, method="lm", options={"xtol": 1e-15, "ftol": 1e-15})
        p = (float(sol.x[0]), float(sol.x[1]))
        r = fun(p)
    except (DomainFault, OverflowError, ValueError):
        return None, math.inf
    res = max(abs(r[0]), abs(r[1]))
    return p, res if math.isfinite(res) else math.inf


class ChartMap:
    """Inverse of the normal chart on a rectangle of chart coordinates.

    ``region`` is ``(x0', x1', y0', y1')`` and must lie in the image of the
    plane.  Newton seeds come from a 64x64 cache built by flowing from the
    anchor along xi'_G (which moves only F) and xi'_F (which moves only G).
    """

    def __init__(self, F: ScalarField, G: ScalarField, box: Box, anchor: Point, region=None,
                 xi=None, image_predicate: Optional[Callable] = None, cache: bool = True,
                 config: IntegratorConfig = DEFAULT_CONFIG):
        self.F, self.G, self.box = F, G, box
        self.anchor = (float(anchor[0]), float(anchor[1]))
        self.region = region
        self.xi = xi
        self.image_predicate = image_predicate
        self.config = config
        self._seeds: Optional[np.ndarray] = None
        self._seed_chart: Optional[np.ndarray] = None
        if cache and region is not None and xi is not None:
            self._build_cache()

    @classmethod
    def for_pair(cls, scenario: "Scenario", pair: SeparatrixPair, width: float = 1.0, cache: bool = True):
        s = pair.side.sign
        lo, hi = sorted((pair.a + s * width, pair.a))
        region = (lo, hi, pair.b1, pair.b2)
        return cls(scenario.F, scenario.G, scenario.box, pair.anchor, region, scenario.xi,
                   scenario.image_test, cache=cache)

    # -- cache -----------------------------------------------------------
    def _build_cache(self):
        x0, x1, y0, y1 = self.region
        xs = np.linspace(x0, x1, CACHE_SIZE)
        ys = np.linspace(y0, y1, CACHE_SIZE)
        d = derived_fields(self.xi, self.F, self.G)
        F0, G0 = to_chart(self.F, self.G, self.anchor)
        pts, chart = [], []
        # seeds only need to land in Newton's basin
        cfg = IntegratorConfig(rtol=1e-7, atol=1e-7, wall_time=2.0)
        for xv in xs:
            base = integrate(d.xi_G, None, self.anchor, float(xv - F0), self.box, config=cfg)
            if base.terminal_event is not Terminal.TimeLimit or base.message:
                continue
            bp = base.point
            Gb = self.G(*bp)
            for sign in (1.0, -1.0):
                targets = [yv for yv in ys if (yv - Gb) * sign >= 0]
                if not targets:
                    continue
                span = max(abs(yv - Gb) for yv in targets)
                col = integrate(d.xi_F, None, bp, sign * span, self.box, config=cfg)
                t_end = col.end[0]
                for yv in targets:
                    t = yv - Gb
                    if abs(t) <= abs(t_end):
                        px, py, _ = col.at(t)
                        pts.append((px, py))
                        chart.append((xv, yv))
        if pts:
            self._seeds = np.asarray(pts)
            self._seed_chart = np.asarray(chart)

    def nearest_seeds(self, xp: float, yp: float, k: int = 3) -> List[Point]:
        if self._seeds is None:
            return []
        d = (self._seed_chart[:, 0] - xp) ** 2 + (self._seed_chart[:, 1] - yp) ** 2
        k = min(k, len(d))
        idx = np.argpartition(d, k - 1)[:k]
        idx = idx[np.argsort(d[idx])]
        return [tuple(map(float, self._seeds[i])) for i in idx]

    # -- inverse -------------------------------------------------------------
    def in_image(self, xp: float, yp: float) -> Optional[bool]:
        if self.image_predicate is None:
            return None
        return bool(self.image_predicate(xp, yp))

    def inverse(self, xp: float, yp: float, hint: Optional[Point] = None) -> Point:
        if self.image_predicate is not None and not self.image_predicate(xp, yp):
            raise OutsideImage(f"({xp}, {yp}) is outside the image of the chart")
        best = math.inf
        if hint is not None:
            p, best = _newton(self.F, self.G, xp, yp, hint, self.box)
            if best < INVERSE_TOL:
                return p
        seeds = self.nearest_seeds(xp, yp)
        for s in seeds:
            p, res = _newton(self.F, self.G, xp, yp, s, self.box)
            if res < INVERSE_TOL:
                return p
            best = min(best, res)
        # Newton jams where dF^dG degenerates; Levenberg-Marquardt does not
        for s in ([hint] if hint is not None else []) + seeds[:1]:
            p, res = _levenberg_marquardt(self.F, self.G, xp, yp, s)
            if res < INVERSE_TOL and self.box.contains(*p):
                return p
            best = min(best, res)
        return self._continuation(xp, yp, best)

    def _continuation(self, xp: float, yp: float, best: float) -> Point:
        start = hint = self.anchor
        F0, G0 = to_chart(self.F, self.G, start)
        s, ds = 0.0, 0.125
        stagnated = False
        while s < 1.0:
            s_next = min(1.0, s + ds)
            tx = F0 + s_next * (xp - F0)
            ty = G0 + s_next * (yp - G0)
            p, res = _newton(self.F, self.G, tx, ty, hint, self.box)
            best = min(best, res) if s_next == 1.0 else best
            if res < INVERSE_TOL:
                hint, s = p, s_next
                ds = min(0.25, ds * 2)
                continue
            if p is not None and not self.box.contains(*p):
                raise OutsideImage(f"continuation toward ({xp}, {yp}) leaves the box")
            ds *= 0.5
            if ds < 1e-6:
                stagnated = True
                break
        if not stagnated:
            return hint
        if self.image_predicate is None:
            near_edge = _near_box_edge(hint, self.box)
            if near_edge:
                raise OutsideImage(f"continuation toward ({xp}, {yp}) exits the box")
        raise NoConvergence(f"cannot invert the chart at ({xp}, {yp})", best)


def _near_box_edge(p: Point, box: Box, frac: float = 0.02) -> bool:
    x, y = p
    wx, wy = box.x1 - box.x0, box.y1 - box.y0
    return (x - box.x0 < frac * wx or box.x1 - x < frac * wx
            or y - box.y0 < frac * wy or box.y1 - y < frac * wy)


def from_chart(chart: ChartMap, xp: float, yp: float, hint: Optional[Point] = None) -> Point:
    """Plane point with F = xp and G = yp to within 1e-10."""
    return chart.inverse(xp, yp, hint)


def transversal_rate(scenario: "Scenario") -> Callable[[float, float], float]:
    """L_xi G as a function of the plane point."""
    xi, G = scenario.xi, scenario.G

    def lg(x, y):
        P, Q = xi(x, y)
        Gx, Gy = G.grad(x, y)
        return P * Gx + Q * Gy
    return lg


def pushforward_rhs(scenario: "Scenario", g: ScalarField, mode: Mode, xp: float, yp: float,
                    chart: Optional[ChartMap] = None, hint: Optional[Point] = None) -> float:
    """Right-hand side of d f/d y' = g_hat at the chart point (xp, yp)."""
    chart = chart or ChartMap(scenario.F, scenario.G, scenario.box, scenario.pairs[0].anchor,
                              xi=scenario.xi, image_predicate=scenario.image_test, cache=False)
    p = chart.inverse(xp, yp, hint)
    return _rhs_at(scenario, g, mode, p)


def _rhs_at(scenario, g, mode, p):
    v = g(*p)
    if mode is Mode.XiPrime:
        return v
    lg = transversal_rate(scenario)(*p)
    if abs(lg) < 1e-14:
        raise DegenerateTransversal(f"|L_xi G| < 1e-14 at {p}")
    return v / lg


def chart_side_rhs(scenario: "Scenario", g: ScalarField, mode: Mode, chart: ChartMap):
    """``g_hat`` as a callable of chart coordinates, warm-starting each
    inversion from the previous preimage."""
    state = {"hint": None}

    def g_hat(xp: float, yp: float) -> float:
        p = chart.inverse(xp, yp, state["hint"])
        state["hint"] = p
        return _rhs_at(scenario, g, mode, p)
    return g_hat


@dataclass
class InseparableCheck:
    delta: float
    start: Optional[Point]
    crossed_b: bool
    crossed_b2: bool
    hit_b: Optional[Point] = None
    hit_b2: Optional[Point] = None
    error: str = ""


@dataclass
class InseparableReport:
    pair: SeparatrixPair
    checks: List[InseparableCheck]
    limit_steps: List[float] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.crossed_b and c.crossed_b2 for c in self.checks)

    @property
    def converging(self) -> bool:
        """Crossings of G = b2 settle down as delta shrinks (they approach s2)."""
        st = self.limit_steps
        return len(st) >= 2 and st[-1] <= st[0]


def verify_inseparable(scenario: "Scenario", pair: SeparatrixPair, deltas: Sequence[float],
                       side: Optional[Side] = None, t_max: float = 500.0,
                       chart: Optional[ChartMap] = None) -> InseparableReport:
    """For each delta, start on the chart point (a -/+ delta, b1), flow with G
    increasing and record whether both G = b and G = b2 are crossed."""
    if any(d <= 0 for d in deltas):
        if any(d == 0 for d in deltas):
            raise OnSeparatrix("delta = 0 starts on the separatrix")
        raise ValueError("deltas must be positive")
    side = side or pair.side
    chart = chart or ChartMap(scenario.F, scenario.G, scenario.box, pair.anchor, xi=scenario.xi,
                              image_predicate=scenario.image_test, cache=False)
    lg = transversal_rate(scenario)
    orient = 1.0 if lg(*pair.anchor) > 0 else -1.0
    G = scenario.G
    checks = []
    hint = None
    for d in deltas:
        xp = pair.a + side.sign * d
        try:
            p = chart.inverse(xp, pair.b1, hint)
        except CohomError as exc:
            checks.append(InseparableCheck(d, None, False, False, error=str(exc)))
            continue
        if side is pair.side:
            hint = p
        traj = integrate(scenario.xi, None, p, orient * t_max, scenario.box,
                         [CrossingEvent(G, pair.b, Direction.Up)])
        c = InseparableCheck(d, p, False, False)
        if traj.terminal_event is Terminal.EventHit:
            c.crossed_b = True
            c.hit_b = traj.point
            traj2 = integrate(scenario.xi, None, traj.point, orient * t_max, scenario.box,
                              [CrossingEvent(G, pair.b2, Direction.Up)])
            if traj2.terminal_event is Terminal.EventHit:
                c.crossed_b2 = True
                c.hit_b2 = traj2.point
            else:
                c.error = f"NoCrossing of G = b2: {traj2.terminal_event.value}"
        else:
            c.error = f"NoCrossing of G = b: {traj.terminal_event.value}"
        checks.append(c)
    hits = [c.hit_b2 for c in checks if c.hit_b2 is not None]
    steps = [math.dist(hits[i], hits[i + 1]) for i in range(len(hits) - 1)]
    return InseparableReport(pair, checks, steps)
