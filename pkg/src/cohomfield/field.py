"""Planar vector fields, scalar fields and the quantities built from a pair
of functions (F, G): Lie derivatives, the area density of dF^dG and the
derived fields xi'_F, xi'_G."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DegenerateTransversal, DomainFault
from .expr import Expr, as_expr

Point = Tuple[float, float]

AUDIT_GRID = 101
AUDIT_RANDOM = 1000
AUDIT_THRESHOLD = 1e-12


@dataclass(frozen=True)
class Box:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate box {self}")

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def grid(self, nx: int = AUDIT_GRID, ny: int = AUDIT_GRID):
        xs = np.linspace(self.x0, self.x1, nx)
        ys = np.linspace(self.y0, self.y1, ny)
        return [(float(x), float(y)) for x in xs for y in ys]

    def random(self, n: int, rng: np.random.Generator):
        xs = rng.uniform(self.x0, self.x1, n)
        ys = rng.uniform(self.y0, self.y1, n)
        return list(zip(xs.tolist(), ys.tolist()))

    def as_tuple(self):
        return (self.x0, self.x1, self.y0, self.y1)


class Component:
    """A scalar function given by closures instead of an expression tree.

    Used for functions the expression language cannot state (piecewise
    definitions) and for fields derived numerically from other fields.
    """

    def __init__(self, value: Callable, dual: Optional[Callable] = None, label: str = "<function>"):
        self._value = value
        self._dual = dual
        self.label = label

    def value_fn(self):
        return self._value

    def dual_fn(self):
        if self._dual is None:
            raise NotImplementedError(f"{self.label} has no derivative")
        return self._dual

    def eval(self, x, y):
        return self._value(x, y)

    def __str__(self):
        return self.label


def _component(e):
    if isinstance(e, (Expr, Component)):
        return e
    return as_expr(e)


class ScalarField:
    """A scalar function on the plane, optionally claimed regular (dF != 0)."""

    def __init__(self, e, regular: bool = False):
        self.e = _component(e)
        self.regular = regular
        self._v = self.e.value_fn()
        self._d = None

    def __call__(self, x: float, y: float) -> float:
        return self._v(x, y)

    value = __call__

    def dual(self, x: float, y: float) -> Tuple[float, float, float]:
        if self._d is None:
            self._d = self.e.dual_fn()
        return self._d(x, y)

    def grad(self, x: float, y: float) -> Tuple[float, float]:
        _, gx, gy = self.dual(x, y)
        return gx, gy

    def __str__(self):
        return str(self.e)

    def __repr__(self):
        return f"ScalarField({str(self.e)!r}, regular={self.regular})"


class PlaneVectorField:
    """xi = P d/dx + Q d/dy."""

    def __init__(self, P, Q):
        self.P = _component(P)
        self.Q = _component(Q)
        self._p = self.P.value_fn()
        self._q = self.Q.value_fn()

    def __call__(self, x: float, y: float) -> Tuple[float, float]:
        return self._p(x, y), self._q(x, y)

    def __repr__(self):
        return f"PlaneVectorField({str(self.P)!r}, {str(self.Q)!r})"


class JointField(PlaneVectorField):
    """A plane field whose two components are computed together."""

    def __init__(self, fn: Callable[[float, float], Tuple[float, float]], label: str = "<field>"):
        self._fn = fn
        self.P = Component(lambda x, y: fn(x, y)[0], label=f"{label}.P")
        self.Q = Component(lambda x, y: fn(x, y)[1], label=f"{label}.Q")

    def __call__(self, x: float, y: float) -> Tuple[float, float]:
        return self._fn(x, y)

    def __repr__(self):
        return f"JointField({self.P.label[:-2]!r})"


def lie_derivative(xi: PlaneVectorField, h: ScalarField, p: Point) -> float:
    """L_xi h = P dh/dx + Q dh/dy at ``p``."""
    x, y = p
    P, Q = xi(x, y)
    hx, hy = h.grad(x, y)
    return P * hx + Q * hy


def area_density(F: ScalarField, G: ScalarField, p: Point) -> float:
    """Coefficient of dx^dy in dF^dG."""
    x, y = p
    Fx, Fy = F.grad(x, y)
    Gx, Gy = G.grad(x, y)
    return Fx * Gy - Fy * Gx


@dataclass
class DerivedFields:
    xi_F: PlaneVectorField
    xi_G: PlaneVectorField
    # +1 when xi/L_xi G is a positive multiple of (dF/dy, -dF/dx)/omega, else -1
    orientation: int
    transversal_sign: int
    min_abs_transversal: float = field(default=math.nan)


def derived_fields(xi: PlaneVectorField, F: ScalarField, G: ScalarField, box: Optional[Box] = None,
                   seed: int = 0) -> DerivedFields:
    """Build xi'_F = xi / L_xi G and xi'_G, the field with L F = 1, L G = 0.

    When ``box`` is given, L_xi G is sampled on the audit grid and random
    points; any zero raises :class:`DegenerateTransversal`.
    """

    def lg(x, y):
        P, Q = xi(x, y)
        Gx, Gy = G.grad(x, y)
        return P * Gx + Q * Gy

    def xf(x, y):
        P, Q = xi(x, y)
        Gx, Gy = G.grad(x, y)
        r = _nonzero(P * Gx + Q * Gy, x, y)
        return P / r, Q / r

    def xg(x, y):
        Fx, Fy = F.grad(x, y)
        Gx, Gy = G.grad(x, y)
        w = _nonzero_area(Fx * Gy - Fy * Gx, x, y)
        return Gy / w, -Gx / w

    xi_F = JointField(xf, "xi'_F")
    xi_G = JointField(xg, "xi'_G")

    orientation = 1
    sign = 1
    min_abs = math.nan
    if box is not None:
        pts = box.grid() + box.random(AUDIT_RANDOM, np.random.default_rng(seed))
        vals = []
        for x, y in pts:
            try:
                vals.append(lg(x, y))
            except DomainFault:
                continue
        vals = np.asarray(vals)
        min_abs = float(np.min(np.abs(vals)))
        if min_abs < AUDIT_THRESHOLD or (vals.max() > 0 > vals.min()):
            raise DegenerateTransversal(f"L_xi G vanishes in {box} (min |L_xi G| = {min_abs:.3g})")
        sign = 1 if vals[0] > 0 else -1
        x, y = pts[len(pts) // 2]
        Fx, Fy = F.grad(x, y)
        hx, hy = Fy, -Fx
        px, py = xi_F(x, y)
        orientation = 1 if px * hx + py * hy > 0 else -1
    return DerivedFields(xi_F, xi_G, orientation, sign, min_abs)


def _nonzero(v, x, y):
    if abs(v) < 1e-300:
        raise DegenerateTransversal(f"L_xi G = 0 at ({x}, {y})")
    return v


def _nonzero_area(v, x, y):
    if v == 0.0:
        raise DegenerateTransversal(f"dF^dG = 0 at ({x}, {y})")
    return v


@dataclass
class RegularityAudit:
    min_speed_sq: float
    min_grad_F: float
    field_regular: bool
    F_regular: bool
    degeneracy_locus: list

    @property
    def ok(self) -> bool:
        return self.field_regular and self.F_regular


def audit_regularity(xi: PlaneVectorField, F: ScalarField, box: Box, seed: int = 0,
                     nx: int = AUDIT_GRID) -> RegularityAudit:
    """Sample |xi|^2 and |grad F| on a uniform grid plus random points.

    Along each grid column the local minima of |grad F| are refined with a
    bounded scalar minimisation, so zeros of dF lying between grid lines
    (like a degenerate separatrix) are located instead of missed.
    """
    rng = np.random.default_rng(seed)
    pts = box.grid(nx, nx) + box.random(AUDIT_RANDOM, rng)
    speeds, grads = [], []
    for x, y in pts:
        try:
            P, Q = xi(x, y)
            speeds.append(P * P + Q * Q)
            gx, gy = F.grad(x, y)
            grads.append(math.hypot(gx, gy))
        except DomainFault:
            continue
    min_speed = float(min(speeds))
    min_grad = float(min(grads))

    locus = []
    ys = np.linspace(box.y0, box.y1, nx)
    dy = ys[1] - ys[0]
    for x in np.linspace(box.x0, box.x1, nx):
        x = float(x)

        def gnorm(y, x=x):
            try:
                gx, gy = F.grad(x, y)
            except DomainFault:
                return math.inf
            return math.hypot(gx, gy)

        col = [gnorm(float(y)) for y in ys]
        for j in range(1, nx - 1):
            if col[j] <= col[j - 1] and col[j] <= col[j + 1]:
                res = minimize_scalar(gnorm, bounds=(ys[j] - dy, ys[j] + dy), method="bounded",
                                      options={"xatol": 1e-13})
                if res.fun < AUDIT_THRESHOLD:
                    locus.append((x, float(res.x)))
    min_grad = min(min_grad, min((0.0 for _ in locus), default=min_grad))
    field_ok = min_speed > AUDIT_THRESHOLD
    F_ok = min_grad > AUDIT_THRESHOLD
    return RegularityAudit(min_speed, min_grad, field_ok, F_ok, locus)
