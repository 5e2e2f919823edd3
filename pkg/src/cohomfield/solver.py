"""Global solutions of L f = g by characteristics, residual checks, contact
exponents between adjacent separatrices and regularity of pullbacks."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .chart import Mode, SeparatrixPair, transversal_rate
from .errors import CohomError, DomainFault, Indeterminate, NoCrossing, TooFewSamples
from .expr import Expr, as_expr
from .field import Box, PlaneVectorField, ScalarField
from .flow import (CrossingEvent, DEFAULT_CONFIG, Direction, IntegratorConfig, Terminal,
                   cross_transversal, integrate)
from .germ import fit_line

Point = Tuple[float, float]

MASK_DISTANCE = 1e-3
RESIDUAL_STEP = 1e-4
T_MAX = 200.0


class Status(enum.Enum):
    Ok = "ok"
    Unreachable = "U"
    NearSeparatrix = "M"


@dataclass
class SeedData:
    """Seed values phi(F) on the transversal leaf G = level."""

    level: float
    phi: Expr = field(default_factory=lambda: as_expr(0))

    @property
    def transversal(self):
        return self.level

    def value(self, F_value: float) -> float:
        return self.phi.eval(F_value, 0.0)


@dataclass
class SolutionGrid:
    box: Box
    nx: int
    ny: int
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray           # shape (nx, ny); NaN where unreachable
    status: List[List[Status]]
    mask_distance: float = MASK_DISTANCE
    residuals: Optional[np.ndarray] = None
    residual_stats: Tuple[float, float] = (math.nan, math.nan)

    def points(self, status: Optional[Status] = None):
        for i, x in enumerate(self.xs):
            for j, y in enumerate(self.ys):
                if status is None or self.status[i][j] is status:
                    yield i, j, (float(x), float(y))

    @property
    def masked_fraction(self) -> float:
        n = sum(row.count(Status.NearSeparatrix) for row in self.status)
        return n / (self.nx * self.ny)

    @property
    def unreachable_fraction(self) -> float:
        n = sum(row.count(Status.Unreachable) for row in self.status)
        return n / (self.nx * self.ny)


def _integrand(scenario, g: ScalarField, mode: Mode):
    """Integrand along xi-time: g for L_xi, g * L_xi G for L_xi'_F."""
    if mode is Mode.Xi:
        return g
    lg = transversal_rate(scenario)

    def rescaled(x, y):
        return g(x, y) * lg(x, y)
    return rescaled


def separatrix_distance(scenario, p: Point) -> float:
    """Chart distance from (F(p), G(p)) to the nearest segment {a} x [b1, b2]."""
    if not scenario.pairs:
        return math.inf
    xp, yp = scenario.F(*p), scenario.G(*p)
    best = math.inf
    for pr in scenario.pairs:
        dy = max(0.0, pr.b1 - yp, yp - pr.b2)
        best = min(best, math.hypot(xp - pr.a, dy))
    return best


def solve_point(scenario, g: ScalarField, mode: Mode, seed: SeedData, p: Point,
                config: IntegratorConfig = DEFAULT_CONFIG, t_max: float = T_MAX) -> Optional[float]:
    """f(p) = phi(F(p)) - I, where I integrates the mode's integrand from p
    to the seed leaf along xi.  None when the leaf is not reached."""
    G = scenario.G
    gp = G(*p) - seed.level
    if gp == 0.0:
        return seed.value(scenario.F(*p))
    lg = transversal_rate(scenario)(*p)
    direction = -math.copysign(1.0, lg) * math.copysign(1.0, gp)
    ev = CrossingEvent(G, seed.level, Direction.Any)
    traj = integrate(scenario.xi, _integrand(scenario, g, mode), p, direction * t_max, scenario.box, [ev], config)
    if traj.terminal_event is not Terminal.EventHit:
        return None
    _, xh, yh, I = traj.end
    return seed.value(scenario.F(*p)) - I


def solve_on_grid(scenario, g, mode: Mode, seed: SeedData, box: Box, nx: int, ny: int,
                  mask_distance: float = MASK_DISTANCE, config: IntegratorConfig = DEFAULT_CONFIG,
                  t_max: float = T_MAX) -> SolutionGrid:
    if nx < 1 or ny < 1:
        raise ValueError("grid needs at least one point in each direction")
    g = g if isinstance(g, ScalarField) else ScalarField(as_expr(g))
    xs = np.linspace(box.x0, box.x1, nx)
    ys = np.linspace(box.y0, box.y1, ny)
    values = np.full((nx, ny), math.nan)
    status = [[Status.Unreachable] * ny for _ in range(nx)]
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            p = (float(x), float(y))
            try:
                v = solve_point(scenario, g, mode, seed, p, config, t_max)
            except (CohomError, OverflowError, ZeroDivisionError):
                v = None
            if v is None or not math.isfinite(v):
                continue
            values[i, j] = v
            near = separatrix_distance(scenario, p) < mask_distance
            status[i][j] = Status.NearSeparatrix if near else Status.Ok
    return SolutionGrid(box, nx, ny, xs, ys, values, status, mask_distance)


def residual_check(scenario, grid: SolutionGrid, g, mode: Mode, seed: SeedData, h: float = RESIDUAL_STEP,
                   config: IntegratorConfig = DEFAULT_CONFIG) -> Tuple[float, float]:
    """Max and mean of |[f(flow_h p) - f(flow_-h p)] / 2h - integrand(p)| over
    the unmasked solved points.  The flowed values come from re-solving."""
    g = g if isinstance(g, ScalarField) else ScalarField(as_expr(g))
    rhs = _integrand(scenario, g, mode)
    res = np.full((grid.nx, grid.ny), math.nan)
    vals = []
    for i, j, p in grid.points(Status.Ok):
        fwd = integrate(scenario.xi, None, p, h, scenario.box, config=config)
        bwd = integrate(scenario.xi, None, p, -h, scenario.box, config=config)
        if fwd.terminal_event is not Terminal.TimeLimit or bwd.terminal_event is not Terminal.TimeLimit:
            continue
        try:
            f1 = solve_point(scenario, g, mode, seed, fwd.point, config)
            f0 = solve_point(scenario, g, mode, seed, bwd.point, config)
        except CohomError:
            continue
        if f1 is None or f0 is None:
            continue
        r = abs((f1 - f0) / (2.0 * h) - rhs(*p))
        res[i, j] = r
        vals.append(r)
    grid.residuals = res
    grid.residual_stats = (max(vals), float(np.mean(vals))) if vals else (math.nan, math.nan)
    return grid.residual_stats


# -- contact exponents -------------------------------------------------------------

def _leaf_field(G: ScalarField, sign: float):
    """Unit tangent of the level sets of G, so integration time is arc length."""
    def v(x, y):
        gx, gy = G.grad(x, y)
        n = math.hypot(gx, gy)
        if n == 0.0:
            raise DomainFault(f"grad G = 0 at ({x}, {y})")
        return sign * gy / n, -sign * gx / n
    return v


@dataclass
class TransversalFrame:
    """Intersection ``q`` of the separatrix F = a with the leaf G = level and
    the direction of the leaf field pointing into V."""

    level: float
    q: Point
    into_v: float


def reach_level(scenario, p: Point, level: float, config: IntegratorConfig = DEFAULT_CONFIG) -> Point:
    """Follow xi from ``p`` to the transversal leaf G = level."""
    G = scenario.G
    gap = level - G(*p)
    if gap == 0.0:
        return p
    direction = math.copysign(1.0, transversal_rate(scenario)(*p)) * math.copysign(1.0, gap)
    q, _, _ = cross_transversal(scenario.xi, None, p, CrossingEvent(G, level), direction * 1e3, scenario.box, config)
    return q


_TIGHT = IntegratorConfig(rtol=1e-13, atol=1e-13, wall_time=5.0)


def _frame(scenario, pair: SeparatrixPair, level: float, config=_TIGHT) -> TransversalFrame:
    F, G = scenario.F, scenario.G
    c = reach_level(scenario, pair.anchor, level, config)
    # walk along G = level until F reaches a; F moves toward a on the V side
    for sign in (1.0, -1.0):
        v = _leaf_field(G, sign)
        Fx, Fy = F.grad(*c)
        dx, dy = v(*c)
        if (Fx * dx + Fy * dy) * pair.side.sign < 0:  # F approaches a from inside V
            q, _, _ = cross_transversal(v, None, c, CrossingEvent(F, pair.a), 1e3, scenario.box, config)
            return TransversalFrame(level, q, -sign)
    raise NoCrossing(f"could not orient the leaf G = {level}")


def contact_exponent(scenario, pair: SeparatrixPair, etas: Sequence[float], reverse: bool = False,
                     config: IntegratorConfig = _TIGHT) -> Tuple[float, float]:
    """Slope of ln(eta_1) against ln(eta_2) where eta_2 is the arc-length
    offset of a leaf from s_2 along G = b2 and eta_1 its offset from s_1 along
    G = b1.  ``reverse`` exchanges the roles of the two transversals.
    Returns ``(alpha_hat, r2)``."""
    F, G = scenario.F, scenario.G
    start_level, end_level = (pair.b1, pair.b2) if reverse else (pair.b2, pair.b1)
    f_start = _frame(scenario, pair, start_level, config)
    f_end = _frame(scenario, pair, end_level, config)
    lg = transversal_rate(scenario)(*pair.anchor)
    direction = math.copysign(1.0, lg) * math.copysign(1.0, end_level - start_level)
    e2s, e1s = [], []
    for eta in etas:
        try:
            v_in = _leaf_field(G, f_start.into_v)
            p = integrate(v_in, None, f_start.q, eta, scenario.box, config=config)
            if p.terminal_event is not Terminal.TimeLimit:
                continue
            hit, _, _ = cross_transversal(scenario.xi, None, p.point, CrossingEvent(G, end_level),
                                          direction * 1e4, scenario.box, config)
            v_out = _leaf_field(G, -f_end.into_v)
            _, t1, _ = cross_transversal(v_out, None, hit, CrossingEvent(F, pair.a), 10.0, scenario.box, config)
        except CohomError:
            continue
        if eta > 1e-10 and t1 > 1e-10:
            e2s.append(eta)
            e1s.append(t1)
    if len(e2s) < 6:
        raise TooFewSamples(f"only {len(e2s)} usable offsets")
    return fit_line(np.log(e2s), np.log(e1s))


# -- regularity of pullbacks -------------------------------------------------------

@dataclass
class CrossLine:
    """Segment from ``start`` to ``end`` crossing the level ``monitor = target``."""

    start: Point
    end: Point
    monitor: Callable[[float, float], float]
    target: float = 0.0

    def at(self, s: float) -> Point:
        return (self.start[0] + s * (self.end[0] - self.start[0]),
                self.start[1] + s * (self.end[1] - self.start[1]))

    def crossing(self) -> float:
        return brentq(lambda s: self.monitor(*self.at(s)) - self.target, 0.0, 1.0, xtol=1e-15, rtol=1e-15,
                      maxiter=1000)


@dataclass
class HolderEstimate:
    gamma: float
    r2: float
    at_least: bool       # no singular term below the probe order was seen
    probe_max: int


def _holder_fit(u: np.ndarray, d: np.ndarray) -> Tuple[float, float]:
    """Fit ln d = gamma ln u + c + k u; the k u term absorbs the first
    correction to the leading power.  Falls back to a plain line fit on few
    points.  R^2 is that of the plain line fit."""
    lu, ld = np.log(u), np.log(d)
    slope, r2 = fit_line(lu, ld)
    if len(u) < 6:
        return slope, r2
    A = np.vstack([lu, np.ones_like(lu), u]).T
    coef, *_ = np.linalg.lstsq(A, ld, rcond=None)
    return float(coef[0]), r2


def pullback_regularity(scenario, f_hat: Callable[[float, float], float], line: CrossLine, probe_max: int = 6,
                        us: Optional[Sequence[float]] = None) -> HolderEstimate:
    """Leading Holder exponent of f_hat(F, G) along ``line`` at its crossing.

    The probe_max-th forward difference with step u (in the segment's
    parameter) annihilates the polynomial part below that order; its size
    scales as u^gamma, and gamma is the log-log slope.
    """
    F, G = scenario.F, scenario.G
    s0 = line.crossing()
    m = probe_max
    if us is None:
        # stencils span at most 6e-3 of the segment; below ~1e-4 the
        # differences of typical O(1) expressions drown in rounding
        us = np.geomspace(1e-3, 1e-5, 21)
    coeffs = [(-1) ** (m - j) * math.comb(m, j) for j in range(m + 1)]
    direction = 1.0 if s0 < 0.5 else -1.0

    def h(s):
        p = line.at(s)
        return f_hat(F(*p), G(*p))

    base = h(s0)
    uu, dd = [], []
    for u in us:
        vals = [h(s0 + direction * j * u) for j in range(m + 1)]
        d = sum(c * v for c, v in zip(coeffs, vals))
        noise = 2 ** m * 1e-16 * (1.0 + max(abs(v) for v in vals) + abs(base))
        if abs(d) > 100.0 * noise:
            uu.append(u)
            dd.append(abs(d))
    if len(uu) < 4:
        return HolderEstimate(float(m), math.nan, True, m)
    gamma, r2 = _holder_fit(np.asarray(uu), np.asarray(dd))
    if not (r2 >= 0.99):
        raise Indeterminate(f"log-log fit R^2 = {r2:.4f} < 0.99 (gamma ~ {gamma:.3f})")
    at_least = gamma >= m - 0.1
    return HolderEstimate(min(gamma, float(m)) if at_least else gamma, r2, at_least, m)
