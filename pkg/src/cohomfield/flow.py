"""Trajectories of planar fields with an accumulated line integral.

The integrator is the Dormand-Prince 5(4) embedded pair with the usual
PI-free step controller.  The state is ``(x, y, I)`` with ``dI/dt = g``.
Event crossings are located by root-finding on a fresh Runge-Kutta step of
variable length taken from the start of the accepted step, so the located
point carries the full integrator accuracy.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

from scipy.optimize import brentq

from .errors import DegenerateTransversal, DomainFault, NoCrossing
from .field import Box

Point = Tuple[float, float]


class Terminal(enum.Enum):
    TimeLimit = "TimeLimit"
    BoxExit = "BoxExit"
    EventHit = "EventHit"
    StepFailure = "StepFailure"


class Direction(enum.Enum):
    Any = 0
    Up = 1
    Down = -1


@dataclass
class CrossingEvent:
    """Stop when ``monitor`` crosses ``target`` in the given direction."""

    monitor: Callable[[float, float], float]
    target: float
    direction: Direction = Direction.Any


@dataclass
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-10
    wall_time: float = 5.0
    h_min: float = 1e-14
    safety: float = 0.9
    max_steps: int = 200_000
    event_tol: float = 1e-12


DEFAULT_CONFIG = IntegratorConfig()


@dataclass
class Trajectory:
    samples: List[Tuple[float, float, float, float]]
    derivs: List[Tuple[float, float, float]]
    terminal_event: Terminal
    event_index: Optional[int] = None
    message: str = ""

    @property
    def end(self) -> Tuple[float, float, float, float]:
        return self.samples[-1]

    @property
    def point(self) -> Point:
        _, x, y, _ = self.samples[-1]
        return x, y

    def at(self, t: float) -> Tuple[float, float, float]:
        """Cubic Hermite interpolation of (x, y, I) on the accepted steps."""
        ts = [s[0] for s in self.samples]
        forward = ts[-1] >= ts[0]
        if not (min(ts[0], ts[-1]) <= t <= max(ts[0], ts[-1])):
            raise ValueError(f"t={t} outside the integrated range")
        lo, hi = 0, len(ts) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if (ts[mid] <= t) == forward:
                lo = mid
            else:
                hi = mid
        t0, t1 = ts[lo], ts[hi]
        h = t1 - t0
        if h == 0.0:
            return self.samples[lo][1:]
        s = (t - t0) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        out = []
        for k in range(3):
            out.append(h00 * self.samples[lo][k + 1] + h10 * h * self.derivs[lo][k]
                       + h01 * self.samples[hi][k + 1] + h11 * h * self.derivs[hi][k])
        return tuple(out)


# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40


def _make_rhs(vf, g):
    if g is None:
        def rhs(x, y):
            p, q = vf(x, y)
            return p, q, 0.0
    else:
        def rhs(x, y):
            p, q = vf(x, y)
            return p, q, g(x, y)
    return rhs


def _dp_step(rhs, x, y, I, k1, h):
    """One DP5(4) step; returns new state, its derivative and the error vector."""
    a1, b1, c1 = k1
    a2, b2, c2 = rhs(x + h * _A21 * a1, y + h * _A21 * b1)
    a3, b3, c3 = rhs(x + h * (_A31 * a1 + _A32 * a2), y + h * (_A31 * b1 + _A32 * b2))
    a4, b4, c4 = rhs(x + h * (_A41 * a1 + _A42 * a2 + _A43 * a3),
                     y + h * (_A41 * b1 + _A42 * b2 + _A43 * b3))
    a5, b5, c5 = rhs(x + h * (_A51 * a1 + _A52 * a2 + _A53 * a3 + _A54 * a4),
                     y + h * (_A51 * b1 + _A52 * b2 + _A53 * b3 + _A54 * b4))
    a6, b6, c6 = rhs(x + h * (_A61 * a1 + _A62 * a2 + _A63 * a3 + _A64 * a4 + _A65 * a5),
                     y + h * (_A61 * b1 + _A62 * b2 + _A63 * b3 + _A64 * b4 + _A65 * b5))
    xn = x + h * (_B1 * a1 + _B3 * a3 + _B4 * a4 + _B5 * a5 + _B6 * a6)
    yn = y + h * (_B1 * b1 + _B3 * b3 + _B4 * b4 + _B5 * b5 + _B6 * b6)
    In = I + h * (_B1 * c1 + _B3 * c3 + _B4 * c4 + _B5 * c5 + _B6 * c6)
    k7 = rhs(xn, yn)
    a7, b7, c7 = k7
    ex = h * (_E1 * a1 + _E3 * a3 + _E4 * a4 + _E5 * a5 + _E6 * a6 + _E7 * a7)
    ey = h * (_E1 * b1 + _E3 * b3 + _E4 * b4 + _E5 * b5 + _E6 * b6 + _E7 * b7)
    eI = h * (_E1 * c1 + _E3 * c3 + _E4 * c4 + _E5 * c5 + _E6 * c6 + _E7 * c7)
    return xn, yn, In, k7, (ex, ey, eI)


def _crossed(m0: float, m1: float, direction: Direction) -> bool:
    if direction is Direction.Up:
        return m0 < 0.0 <= m1
    if direction is Direction.Down:
        return m0 > 0.0 >= m1
    return (m0 < 0.0 <= m1) or (m0 > 0.0 >= m1)


def integrate(field, g, p0: Point, t_max: float, box: Optional[Box] = None,
              events: Sequence[CrossingEvent] = (), config: IntegratorConfig = DEFAULT_CONFIG) -> Trajectory:
    """Integrate ``field`` from ``p0`` for signed time ``t_max``.

    ``field`` maps ``(x, y)`` to ``(P, Q)``; ``g`` (or None) is integrated
    alongside.  Termination is reported in ``terminal_event``; nothing is
    raised for time limits, box exits or step failures.
    """
    rhs = _make_rhs(field, g)
    x, y = float(p0[0]), float(p0[1])
    I = 0.0
    t = 0.0
    sgn = 1.0 if t_max >= 0 else -1.0
    T = abs(t_max)
    rtol, atol = config.rtol, config.atol
    deadline = time.perf_counter() + config.wall_time

    try:
        k1 = rhs(x, y)
    except (DomainFault, DegenerateTransversal) as exc:
        return Trajectory([(0.0, x, y, 0.0)], [(math.nan,) * 3], Terminal.StepFailure, message=str(exc))
    samples = [(0.0, x, y, 0.0)]
    derivs = [k1]
    mons = [ev.monitor(x, y) - ev.target for ev in events]

    h = min(T, 1e-2)
    steps = 0
    while True:
        if t >= T:
            return Trajectory(samples, derivs, Terminal.TimeLimit)
        if steps >= config.max_steps or time.perf_counter() > deadline:
            return Trajectory(samples, derivs, Terminal.TimeLimit, message="guard")
        if h < config.h_min:
            return Trajectory(samples, derivs, Terminal.StepFailure, message="step underflow")
        h = min(h, T - t)
        try:
            xn, yn, In, k7, (ex, ey, eI) = _dp_step(rhs, x, y, I, k1, sgn * h)
            err = math.sqrt(((ex / (atol + rtol * max(abs(x), abs(xn)))) ** 2
                             + (ey / (atol + rtol * max(abs(y), abs(yn)))) ** 2
                             + (eI / (atol + rtol * max(abs(I), abs(In)))) ** 2) / 3.0)
            if not math.isfinite(err):
                raise DomainFault("non-finite step")
        except (DomainFault, DegenerateTransversal, OverflowError, ZeroDivisionError):
            h *= 0.25
            steps += 1
            continue
        steps += 1
        if err > 1.0:
            h *= max(0.2, config.safety * err ** -0.2)
            continue

        # accepted step
        new_mons = []
        hit = None
        for i, ev in enumerate(events):
            try:
                m1 = ev.monitor(xn, yn) - ev.target
            except (DomainFault, OverflowError):
                m1 = math.nan
            new_mons.append(m1)
            if m1 == m1 and _crossed(mons[i], m1, ev.direction):
                tau = _locate(rhs, x, y, I, k1, sgn * h, ev)
                if hit is None or abs(tau) < abs(hit[1]):
                    hit = (i, tau)
        if hit is not None:
            i, tau = hit
            xe, ye, Ie, ke, _ = _dp_step(rhs, x, y, I, k1, tau)
            samples.append((t * sgn + tau, xe, ye, Ie))
            derivs.append(ke)
            return Trajectory(samples, derivs, Terminal.EventHit, event_index=i)

        t += h
        x, y, I, k1 = xn, yn, In, k7
        mons = new_mons
        samples.append((sgn * t, x, y, I))
        derivs.append(k1)
        if box is not None and not box.contains(x, y):
            return Trajectory(samples, derivs, Terminal.BoxExit)
        fac = config.safety * err ** -0.2 if err > 0 else 5.0
        h *= min(5.0, max(0.2, fac))


def _locate(rhs, x, y, I, k1, h, ev: CrossingEvent) -> float:
    """Signed sub-step ``tau`` in (0, h] at which the monitor hits its target."""

    def f(tau):
        if tau == 0.0:
            return ev.monitor(x, y) - ev.target
        xe, ye, _, _, _ = _dp_step(rhs, x, y, I, k1, tau)
        return ev.monitor(xe, ye) - ev.target

    fa, fb = f(0.0), f(h)
    if fb == 0.0:
        return h
    if fa == 0.0 or fa * fb > 0:
        return h
    tau = brentq(f, 0.0, h, xtol=4e-16 * max(1.0, abs(h)), rtol=1e-15, maxiter=200)
    # step to the side where the target has been reached
    fv = f(tau)
    if fv != 0.0 and (fv > 0) == (fa > 0):
        tau = math.nextafter(tau, h)
    return tau


def cross_transversal(field, g, p0: Point, event: CrossingEvent, t_max: float, box: Optional[Box] = None,
                      config: IntegratorConfig = DEFAULT_CONFIG):
    """First crossing of ``event``; returns ``(point, t_hit, I)``."""
    traj = integrate(field, g, p0, t_max, box, [event], config)
    if traj.terminal_event is not Terminal.EventHit:
        raise NoCrossing(f"no crossing from {p0}: {traj.terminal_event.value} {traj.message}".strip())
    t, x, y, I = traj.end
    return (x, y), t, I
