"""Adaptive Gauss-Kronrod (7/15) quadrature with global interval bisection."""
from __future__ import annotations

import heapq
import math
from typing import Callable, Iterable, Tuple

from .errors import QuadratureFailure

_XGK = (0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
        0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
        0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
        0.207784955007898467600689403773245, 0.0)
_WGK = (0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
        0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
        0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
        0.204432940075298892414161999234649, 0.209482141084727828012999174891714)
# Gauss weights at _XGK[1], _XGK[3], _XGK[5], _XGK[7]
_WG = (0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
       0.381830050505118944950369775488975, 0.417959183673469387755102040816327)

MAX_SUBDIVISIONS = 2000


def gk15(f: Callable[[float], float], a: float, b: float) -> Tuple[float, float]:
    """Kronrod estimate of the integral on [a, b] and its error estimate.

    The error is QUADPACK's rescaling of |Kronrod - Gauss|, which is far less
    pessimistic than the raw difference on smooth pieces.
    """
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    fc = f(c)
    k = _WGK[7] * fc
    g = _WG[3] * fc
    vals = [(fc, fc)]
    for j in range(7):
        dx = h * _XGK[j]
        f1, f2 = f(c - dx), f(c + dx)
        vals.append((f1, f2))
        k += _WGK[j] * (f1 + f2)
        if j % 2 == 1:
            g += _WG[j // 2] * (f1 + f2)
    mean = 0.5 * k
    asc = _WGK[7] * abs(fc - mean)
    for j in range(7):
        f1, f2 = vals[j + 1]
        asc += _WGK[j] * (abs(f1 - mean) + abs(f2 - mean))
    asc *= abs(h)
    err = abs((k - g) * h)
    if asc != 0.0 and err != 0.0:
        err = asc * min(1.0, (200.0 * err / asc) ** 1.5)
    return k * h, err


def integrate(f: Callable[[float], float], a: float, b: float, abs_tol: float = 1e-14,
              rel_tol: float = 1e-12, breakpoints: Iterable[float] = (),
              max_subdivisions: int = MAX_SUBDIVISIONS) -> Tuple[float, float]:
    """Integrate ``f`` over [a, b]; returns ``(value, error_estimate)``.

    Interior ``breakpoints`` seed the initial partition.  The interval with
    the largest error is bisected until the summed error meets
    ``max(abs_tol, rel_tol * |value|)``.
    """
    if a == b:
        return 0.0, 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    pts = sorted({a, b, *(p for p in breakpoints if a < p < b)})
    heap = []
    total = err = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        v, e = gk15(f, lo, hi)
        total += v
        err += e
        heapq.heappush(heap, (-e, lo, hi, v))
    n = len(heap)
    while err > max(abs_tol, rel_tol * abs(total)):
        if n >= max_subdivisions:
            raise QuadratureFailure(f"error estimate {err:.3g} after {n} subdivisions on [{a}, {b}]")
        e0, lo, hi, v0 = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi):
            raise QuadratureFailure(f"interval [{lo}, {hi}] cannot be bisected further (error {err:.3g})")
        v1, e1 = gk15(f, lo, mid)
        v2, e2 = gk15(f, mid, hi)
        total += v1 + v2 - v0
        err += e1 + e2 + e0
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        n += 1
    # re-sum to shed accumulated cancellation in the running totals
    total = math.fsum(item[3] for item in heap)
    err = math.fsum(-item[0] for item in heap)
    return sign * total, err
