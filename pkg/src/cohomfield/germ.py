"""Germ profiles phi(x') = int_{b1}^{b2} g_hat(x', y') dy' next to a pair of
separatrices and their numerical classification: C^r extendability of phi
to x' = a, power or logarithmic blow-up, and W^{l,p} membership."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import quadrature
from .chart import ChartMap, Mode, SeparatrixPair, chart_side_rhs
from .errors import CohomError, QuadratureFailure, TooFewSamples

ChartFunction = Callable[[float, float], float]


class _Indeterminate:
    """Answer of a decision that falls inside the classifier's margin."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Indeterminate"

    def __bool__(self):
        raise TypeError("Indeterminate has no truth value; compare with `is`")


INDETERMINATE = _Indeterminate()


@dataclass
class GermConfig:
    delta0: float = 0.1
    rho: float = 0.5
    n_samples: int = 25
    r_max: int = 4
    tol_c: float = 1e-3
    margin: float = 0.02
    quad_tol: float = 1e-11
    fit_window: int = 10
    # the first samples are dropped from every test: a perturbation supported
    # at chart distance >= 0.05 - 0.02 from the pair only reaches them
    skip: int = 4
    noise_floor: float = 1e-13
    min_samples: int = 12


DEFAULT_GERM = GermConfig()


@dataclass
class GermProfile:
    pair: SeparatrixPair
    xs: List[float]           # offsets delta_n > 0 from a, on the pair's side
    phis: List[float]
    quad_errors: List[float]
    failures: List[str] = field(default_factory=list)

    @property
    def points(self) -> List[float]:
        return [self.pair.chart_offset(d) for d in self.xs]

    def retained(self):
        keep = [i for i, p in enumerate(self.phis) if math.isfinite(p)]
        return ([self.xs[i] for i in keep], [self.phis[i] for i in keep], [self.quad_errors[i] for i in keep])


def sample_offsets(config: GermConfig = DEFAULT_GERM) -> List[float]:
    return [config.delta0 * config.rho ** n for n in range(config.n_samples)]


def _breakpoints(b: float, lo: float, hi: float, delta: float) -> List[float]:
    pts = [b]
    s = delta
    while s < hi - lo:
        pts += [b - s, b + s]
        s *= 4.0
    return [p for p in pts if lo < p < hi]


def phi_at(pair: SeparatrixPair, g_hat: ChartFunction, delta: float, quad_tol: float) -> Tuple[float, float]:
    xp = pair.chart_offset(delta)
    return quadrature.integrate(lambda yp: g_hat(xp, yp), pair.b1, pair.b2, abs_tol=quad_tol,
                                rel_tol=quad_tol, breakpoints=_breakpoints(pair.b, pair.b1, pair.b2, delta))


def phi_profile(scenario, pair: SeparatrixPair, g_hat: ChartFunction, quad_tol: Optional[float] = None,
                config: GermConfig = DEFAULT_GERM) -> GermProfile:
    """Sample phi at the geometric offsets delta_n = delta0 rho^n.

    ``scenario`` is accepted for symmetry with the other entry points and may
    be None when ``g_hat`` is given directly in chart coordinates.  Samples
    whose quadrature (or chart inversion) fails are kept as NaN and listed
    in ``failures``.
    """
    tol = config.quad_tol if quad_tol is None else quad_tol
    xs, phis, errs, fails = [], [], [], []
    for d in sample_offsets(config):
        try:
            v, e = phi_at(pair, g_hat, d, tol)
            if not math.isfinite(v):
                raise QuadratureFailure(f"non-finite integral at offset {d:.3g}")
        except CohomError as exc:
            v, e = math.nan, math.inf
            fails.append(f"delta={d:.3g}: {type(exc).__name__}: {exc}")
        xs.append(d)
        phis.append(v)
        errs.append(e)
    if all(not math.isfinite(p) for p in phis):
        raise QuadratureFailure("no profile sample could be computed: " + fails[0])
    return GermProfile(pair, xs, phis, errs, fails)


# -- classification -------------------------------------------------------------

def _divided_differences(x: np.ndarray, v: np.ndarray, eps: np.ndarray, r: int):
    """r-th divided differences on consecutive nodes, with propagated noise."""
    n = len(x) - r
    D = np.empty(n)
    N = np.empty(n)
    for i in range(n):
        nodes = x[i:i + r + 1]
        w = np.array([1.0 / np.prod([nodes[j] - nodes[k] for k in range(r + 1) if k != j])
                      for j in range(r + 1)])
        D[i] = float(np.dot(w, v[i:i + r + 1]))
        N[i] = float(np.dot(np.abs(w), eps[i:i + r + 1]))
    return D, N


def fit_line(u: np.ndarray, v: np.ndarray) -> Tuple[float, float]:
    """Least-squares slope and R^2 of v against u."""
    if len(u) < 2:
        return math.nan, math.nan
    A = np.vstack([u, np.ones_like(u)]).T
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((v - pred) ** 2))
    ss_tot = float(np.sum((v - v.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), r2


@dataclass
class SequenceTest:
    """Convergence evidence for one divided-difference order."""

    order: int
    converged: bool
    slope: float          # of ln|successive difference| against ln(delta)
    r2: float
    informative: int


def _sequence_test(delta, phi, eps, r, config) -> SequenceTest:
    x = -delta  # any affine image of the offsets gives the same |D|
    D, N = _divided_differences(x, phi, eps, r)
    d_mid = delta[:len(D)]
    dif = np.diff(D)
    noise = N[:-1] + N[1:]
    inf = np.abs(dif) > 10.0 * noise
    # scales where the difference is buried in propagated noise carry no information
    idx = np.nonzero(inf)[0]
    if len(idx) == 0:
        return SequenceTest(r, True, math.nan, math.nan, 0)
    tail = idx[-4:]
    scale = np.maximum(1.0, np.abs(D[tail + 1]))
    cauchy = len(tail) >= 1 and bool(np.all(np.abs(dif[tail]) <= config.tol_c * scale))
    win = idx[-config.fit_window:]
    slope, r2 = fit_line(np.log(d_mid[win + 1]), np.log(np.abs(dif[win]))) if len(win) >= 3 else (math.nan, math.nan)
    decays = math.isfinite(slope) and slope >= 0.05
    return SequenceTest(r, cauchy or decays, slope, r2, len(idx))


@dataclass
class GermClass:
    r_hat: Optional[int]
    beta_hat: float
    log_flag: bool
    fit_r2: float
    r_max: int
    margin: float = 0.02
    # blow-up exponent e_l of the l-th derivative for l > r_hat (0 = log)
    exponents: Dict[int, float] = field(default_factory=dict)
    tests: List[SequenceTest] = field(default_factory=list)

    def exponent(self, l: int) -> float:
        if l in self.exponents:
            return self.exponents[l]
        if self.r_hat is None:
            return self.beta_hat + l
        return math.nan

    def _single(self, l: int, p: float):
        if self.r_hat is not None and self.r_hat >= l:
            return True
        if self.r_hat is None and self.log_flag:
            if l == 0:
                return True
            e = float(l)
        else:
            e = self.exponent(l)
            if not math.isfinite(e):
                return INDETERMINATE
            if e < 0.05:
                return True  # logarithmic blow-up of the l-th derivative
        ep = e * p
        if ep < 1.0 - self.margin:
            return True
        # at ep = 1 the germ is outside L^p, so only the lower band is undecided
        if ep < 1.0 - 0.1 * self.margin:
            return INDETERMINATE
        return False

    def sobolev(self, l: int, p: float):
        """True, False or INDETERMINATE for membership of phi in W^{l,p} near a."""
        if l < 0 or p < 1:
            raise ValueError("need l >= 0 and p >= 1")
        verdict = True
        for j in range(l + 1):
            v = self._single(j, p)
            if v is False:
                return False
            if v is INDETERMINATE:
                verdict = INDETERMINATE
        return verdict

    def check_invariants(self) -> None:
        for l in range(self.r_max + 1):
            for p in (1.0, 2.0):
                if self.r_hat is not None and self.r_hat >= l:
                    assert self.sobolev(l, p) is True
                if l > 0 and self.sobolev(l, p) is True:
                    assert self.sobolev(l - 1, p) is True


def classify_germ(profile: GermProfile, r_max: Optional[int] = None,
                  config: GermConfig = DEFAULT_GERM) -> GermClass:
    r_max = config.r_max if r_max is None else r_max
    delta, phi, qerr = profile.retained()
    delta = np.asarray(delta)[config.skip:]
    phi = np.asarray(phi)[config.skip:]
    qerr = np.asarray(qerr)[config.skip:]
    if len(phi) < config.min_samples:
        raise TooFewSamples(f"{len(phi)} usable samples, need {config.min_samples}")
    eps = qerr + config.noise_floor * (1.0 + np.abs(phi))

    tests = [_sequence_test(delta, phi, eps, r, config) for r in range(r_max + 1)]
    r_hat = None
    for t in tests:
        if not t.converged:
            break
        r_hat = t.order

    beta, log_flag, r2 = 0.0, False, math.nan
    exponents: Dict[int, float] = {}
    if r_hat is None:
        t0 = tests[0]
        beta = max(0.0, -t0.slope) if math.isfinite(t0.slope) else math.nan
        r2 = t0.r2
        if math.isfinite(beta) and beta < 0.05:
            log_flag = True
            win = slice(-config.fit_window, None)
            _, r2 = fit_line(np.log(1.0 / delta[win]), np.abs(phi[win]))
            beta = 0.0
    else:
        for t in tests[r_hat + 1:]:
            exponents[t.order] = max(0.0, -t.slope) if math.isfinite(t.slope) else math.nan
        if r_hat + 1 <= r_max:
            r2 = tests[r_hat + 1].r2
    gc = GermClass(r_hat, beta, log_flag, r2, r_max, config.margin, exponents, tests)
    gc.check_invariants()
    return gc


# -- regularity of g_hat in the first variable -------------------------------------

_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


def x_regularity_probe(scenario, pair: SeparatrixPair, g_hat: ChartFunction, k: int,
                       h0: float = 0.1, halvings: int = 10, n_y: int = 41):
    """Is the (k+1)-th x' derivative of g_hat bounded up to {a} x (b1, b2)?

    The (k+1)-th forward difference with step h is taken from x' = a -/+ h
    away from the pair, on ordinates spread over (b1, b2) plus ordinates at
    irrational multiples of h around b.  Returns True when the maximum stays
    flat over the last four informative halvings, False when it grows, and
    INDETERMINATE when the scales disagree.
    """
    m = k + 1
    if m > 6:
        raise ValueError("finite-difference order is limited to 6")
    s = pair.side.sign
    span = pair.b2 - pair.b1
    base_y = [pair.b1 + span * ((i + _GOLD) / n_y) for i in range(n_y)]
    coeffs = [(-1) ** (m - j) * math.comb(m, j) for j in range(m + 1)]
    maxima, noise = [], []
    h = h0
    for _ in range(halvings):
        ys = base_y + [pair.b + c * h * _GOLD for c in (-3, -1, 1, 3)]
        ys = [y for y in ys if pair.b1 < y < pair.b2]
        best, gmax = 0.0, 0.0
        for y in ys:
            vals = [g_hat(pair.a + s * (1.0 + j) * h, y) for j in range(m + 1)]
            diff = sum(c * v for c, v in zip(coeffs, vals)) / h ** m
            best = max(best, abs(diff))
            gmax = max(gmax, max(abs(v) for v in vals))
        maxima.append(best)
        noise.append(2 ** m * 1e-15 * (1.0 + gmax) / h ** m)
        h *= 0.5
    use = [i for i in range(halvings) if maxima[i] > 100.0 * noise[i]]
    use = [i for i in use if all(j in use for j in range(i))]  # stop at the first noisy scale
    if len(use) < 2:
        return True
    last = use[-4:]
    slope, _ = fit_line(np.array(last, dtype=float), np.log2(np.array([maxima[i] for i in last])))
    if slope < 0.15:
        return True
    if slope > 0.5:
        return False
    return INDETERMINATE


# -- equation-level verdict ---------------------------------------------------

@dataclass
class PairVerdict:
    pair: SeparatrixPair
    germ: Optional[GermClass]
    error: str = ""


@dataclass
class EquationVerdict:
    label: str                              # "iff" or "sufficient-only"
    pairs: List[PairVerdict]
    r_hat: Optional[int]
    sobolev: Dict[Tuple[int, float], object]
    unknown: bool = False

    @property
    def c0(self):
        return self.r_hat is not None


def combine(values: Sequence[object]):
    """Conjunction over pairs with INDETERMINATE and "Unknown" propagation."""
    if any(v is False for v in values):
        return False
    if any(v == "Unknown" for v in values if isinstance(v, str)):
        return "Unknown"
    if any(v is INDETERMINATE for v in values):
        return INDETERMINATE
    return True


def classify_equation(scenario, g, mode: Mode = Mode.XiPrime, r_max: Optional[int] = None,
                      p_list: Sequence[float] = (1.0, 2.0), l_list: Sequence[int] = (0, 1),
                      config: GermConfig = DEFAULT_GERM, g_hat: Optional[ChartFunction] = None) -> EquationVerdict:
    """Classify L f = g (``mode`` selects xi or xi'_F) at every separatrix pair.

    ``g_hat`` optionally replaces the pushforward of ``g`` (same function for
    every pair, in chart coordinates).
    """
    if not scenario.pairs:
        raise ValueError(f"scenario {scenario.name!r} declares no separatrix pair")
    r_max = config.r_max if r_max is None else r_max
    verdicts = []
    for pair in scenario.pairs:
        try:
            if g_hat is None:
                chart = ChartMap.for_pair(scenario, pair, width=2.0 * config.delta0)
                gh = chart_side_rhs(scenario, g, mode, chart)
            else:
                gh = g_hat
            prof = phi_profile(scenario, pair, gh, config=config)
            verdicts.append(PairVerdict(pair, classify_germ(prof, r_max, config)))
        except CohomError as exc:
            verdicts.append(PairVerdict(pair, None, f"{type(exc).__name__}: {exc}"))
    unknown = any(v.germ is None for v in verdicts)
    r_hat = None if unknown else min((v.germ.r_hat for v in verdicts),
                                     key=lambda r: -1 if r is None else r)
    table = {}
    for l in l_list:
        for p in p_list:
            table[(l, p)] = combine([v.germ.sobolev(l, p) if v.germ else "Unknown" for v in verdicts])
    label = "iff" if scenario.hamiltonian else "sufficient-only"
    return EquationVerdict(label, verdicts, r_hat, table, unknown)
