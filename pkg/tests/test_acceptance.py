"""Acceptance suite: closed-form oracles and property checks.

Each criterion records a PASS/FAIL line, listed in the terminal summary.
"""
import functools
import math

import numpy as np
import pytest

from cohomfield.chart import ChartMap, Mode, SeparatrixPair, Side, chart_side_rhs, to_chart, from_chart
from cohomfield.expr import parse
from cohomfield.field import Box, ScalarField, area_density
from cohomfield.flow import IntegratorConfig, Terminal, integrate
from cohomfield.germ import DEFAULT_GERM, INDETERMINATE, classify_equation, classify_germ, phi_profile
from cohomfield.scenarios import BUILTIN_NAMES, builtin, chart_scenario, hyp_fhat
from cohomfield.solver import (CrossLine, SeedData, Status, contact_exponent, pullback_regularity,
                               residual_check, solve_on_grid)

CHART_PAIR = SeparatrixPair(0.0, 0.0, -1.0, 1.0, Side.Left, (-0.5, 0.0))
ALPHAS = (0.1, 0.25, 0.4, 0.6, 0.75, 0.9, 1.1)


@functools.lru_cache(maxsize=None)
def power_germ(alpha):
    g_hat = lambda x, y: (x * x + y * y) ** (-alpha)
    return classify_germ(phi_profile(None, CHART_PAIR, g_hat))


# -- 1: threshold law -------------------------------------------------------------

@pytest.mark.parametrize("alpha", ALPHAS)
def test_threshold_law(alpha, report):
    gc = power_germ(alpha)
    c0 = gc.r_hat is not None
    l1 = gc.sobolev(0, 1.0)
    detail = f"alpha={alpha}, r_hat={gc.r_hat}, beta_hat={gc.beta_hat:.4f}, L1={l1}"
    if alpha < 0.5:
        ok = c0
    elif alpha < 1.0:
        ok = (not c0) and l1 is True and abs(gc.beta_hat - (2 * alpha - 1)) <= 0.05
    else:
        ok = (not c0) and l1 is False and abs(gc.beta_hat - (2 * alpha - 1)) <= 0.05
    report(1, "C0 / L1_loc threshold law for |p|^(-2 alpha)", ok, detail)
    assert ok


# -- 2: Sobolev law ----------------------------------------------------------------

@pytest.mark.parametrize("alpha", ALPHAS)
def test_sobolev_law(alpha, report):
    # The stated bound alpha <= 1/p - l/2 is sufficient: inside it (with a
    # 0.05 margin) the verdict must be True.  The exact threshold for the
    # profile of |p|^(-2 alpha) is alpha < 1/(2p) + (1 - l)/2; beyond it by
    # 0.05 the verdict must be False.
    gc = power_germ(alpha)
    checked, bad = 0, []
    for l in (0, 1):
        for p in (1.0, 2.0):
            v = gc.sobolev(l, p)
            stated = 1.0 / p - l / 2.0
            exact = 1.0 / (2.0 * p) + (1.0 - l) / 2.0
            if alpha <= stated - 0.05:
                checked += 1
                if v is not True:
                    bad.append((l, p, v))
            elif alpha >= exact + 0.05:
                checked += 1
                if v is not False:
                    bad.append((l, p, v))
    ok = not bad
    report(2, "sobolev(l, p) agrees with the Sobolev inequality", ok,
           f"alpha={alpha}, {checked} cells checked, mismatches={bad}")
    assert ok


# -- 3: borderline germ --------------------------------------------------------------

def test_borderline_germ(report):
    gc = classify_germ(phi_profile(None, CHART_PAIR, lambda x, y: x / math.hypot(x, y)))
    ok = gc.r_hat == 0
    report(3, "x'/|p| is C0 but not C1", ok, f"r_hat={gc.r_hat}")
    assert ok


# -- 4: odd germs ----------------------------------------------------------------------

@pytest.mark.parametrize("label,g_hat", [
    ("y/|p|^1.5", lambda x, y: y * (x * x + y * y) ** -0.75),
    ("sin(y) exp(x)", lambda x, y: math.sin(y) * math.exp(x)),
    ("y^3/(x^2+y^2)", lambda x, y: y ** 3 / (x * x + y * y)),
])
def test_odd_germs(label, g_hat, report):
    prof = phi_profile(None, CHART_PAIR, g_hat)
    gc = classify_germ(prof)
    worst = max(abs(p) for p in prof.phis)
    table = {(l, p): gc.sobolev(l, p) for l in range(gc.r_max + 1) for p in (1.0, 2.0)}
    ok = gc.r_hat == gc.r_max and all(v is True for v in table.values()) and worst < 1e-12
    report(4, f"y-odd germ {label} is fully regular", ok, f"r_hat={gc.r_hat}, max|phi|={worst:.2e}")
    assert ok


def test_odd_germ_plane_side(report):
    sc = builtin("ham-strip")
    pair = sc.pairs[0]
    chart = ChartMap.for_pair(sc, pair, width=2.0 * DEFAULT_GERM.delta0)
    prof = phi_profile(sc, pair, chart_side_rhs(sc, ScalarField(parse("y")), Mode.XiPrime, chart))
    gc = classify_germ(prof)
    worst = max(abs(p) for p in prof.phis)
    ok = gc.r_hat == gc.r_max and worst < 1e-12
    report(4, "g = y on ham-strip (xi'_F) has an odd, fully regular germ", ok,
           f"r_hat={gc.r_hat}, max|phi|={worst:.2e}")
    assert ok


# -- 5: example-1 oracle -----------------------------------------------------------------

def test_example_one_oracle(report):
    sc = builtin("ham-strip")
    g = ScalarField(parse("1"))
    seed = SeedData(0.0)
    grid = solve_on_grid(sc, g, Mode.Xi, seed, Box(-3.0, 1.5, -2.5, 2.5), 16, 17)
    exact = parse("0.5*ln(abs((1+y)/(1-y)))").value_fn()
    err = max(abs(grid.values[i, j] - exact(*p)) for i, j, p in grid.points(Status.Ok))
    res_max, _ = residual_check(sc, grid, g, Mode.Xi, seed)
    verdict = classify_equation(sc, g, Mode.Xi)
    ok = err < 1e-6 and res_max < 1e-5 and verdict.r_hat is None and verdict.sobolev[(0, 1.0)] is True
    report(5, "L_xi f = 1 solved by 1/2 ln|(1+y)/(1-y)|, no C^r solution, L1_loc solvable", ok,
           f"max err={err:.2e}, residual={res_max:.2e}, r_hat={verdict.r_hat}, L1={verdict.sobolev[(0, 1.0)]}")
    assert ok


# -- 6: hypergeometric oracle ----------------------------------------------------------------

def test_hypergeometric_oracle(report):
    sc = chart_scenario()
    g = parse("(x^2+y^2)^(-1/4)")
    grid = solve_on_grid(sc, ScalarField(g), Mode.Xi, SeedData(0.0), Box(-2.0, -0.1, -2.0, 2.0), 20, 20)
    err = max(abs(grid.values[i, j] - hyp_fhat(*p)) for i, j, p in grid.points(Status.Ok))
    solved = sum(1 for _ in grid.points(Status.Ok))
    # derivative oracle: d/dy' of the closed form reproduces the integrand
    gv = g.value_fn()
    h = 1e-5
    dev = max(abs((hyp_fhat(x, y + h) - hyp_fhat(x, y - h)) / (2 * h) - gv(x, y))
              for x in (-1.7, -0.6, -0.15) for y in (-1.5, -0.3, 0.4, 1.9))
    ok = solved == 400 and err < 1e-5 and dev < 1e-6
    report(6, "chart-side solve matches the 2F1 closed form", ok,
           f"max err={err:.2e} on {solved} points, derivative check={dev:.2e}")
    assert ok


# -- 7: contact exponents ----------------------------------------------------------------

ETAS = np.geomspace(1e-1, 1e-3, 12)


def test_contact_hamiltonian(report):
    sc = builtin("ham-strip")
    alpha, r2 = contact_exponent(sc, sc.pairs[0], ETAS)
    ok = abs(alpha - 1.0) <= 0.05
    report(7, "ham-strip contact exponent is 1", ok, f"alpha_hat={alpha:.4f}, R2={r2:.5f}")
    assert ok


def test_contact_nonhamiltonian(report):
    sc = builtin("nonham-strip")
    rev, _ = contact_exponent(sc, sc.pairs[0], ETAS, reverse=True)
    fwd, _ = contact_exponent(sc, sc.pairs[0], ETAS)
    ok = abs(rev - 3.0) <= 0.1 and abs(1.0 / fwd - 3.0) <= 0.1
    report(7, "nonham-strip contact exponent is 3 (1/3 with roles exchanged)", ok,
           f"alpha_hat={rev:.4f}, reversed roles={fwd:.4f}")
    assert ok


# -- 8: pullback regularity --------------------------------------------------------------

def test_pullback_regularity(report):
    sc = builtin("nonham-strip")
    known = next(k for k in sc.known if k.frame == "chart")
    f_hat = known.f.value_fn()
    est = pullback_regularity(sc, f_hat, CrossLine((0.3, 0.5), (0.3, 1.5), lambda x, y: y, 1.0))
    smooth = pullback_regularity(sc, f_hat, CrossLine((0.3, -1.5), (0.3, -0.5), lambda x, y: y, -1.0))
    ok = abs(est.gamma - 13.0 / 3.0) <= 0.1 and not est.at_least and smooth.at_least
    report(8, "pullback of the chart solution behaves as (y-1)^(13/3)", ok,
           f"gamma_hat={est.gamma:.4f}, R2={est.r2:.6f}; at y=-1 gamma>={smooth.gamma:.0f}")
    assert ok


# -- 9: area-form oracles ----------------------------------------------------------------

def _area_mismatch(name, closed_form, n=100):
    sc = builtin(name)
    form = parse(closed_form).value_fn()
    worst = 0.0
    for p in sc.view.random(n, np.random.default_rng(9)):
        got = area_density(sc.F, sc.G, p)
        want = form(*p)
        worst = max(worst, abs(got - want) / max(abs(want), 1e-300))
    return worst


AREA_FORMS = [
    ("ham-strip", "2*(1+y^2)*exp(2*x)"),
    ("nontranslation", "1/((1-x*y^2)^2+x^2)"),
    pytest.param("nonham-strip", "2*(1+y)^2*(2-4*y+3*y^2)*exp(2*x)",
                 marks=pytest.mark.xfail(strict=True, reason="stated form has the wrong sign; see decisions ledger")),
    pytest.param("three-seps", "1",
                 marks=pytest.mark.xfail(strict=True, reason="dF^dG equals dF/dx dx^dy, not dx^dy; see decisions ledger")),
]


@pytest.mark.parametrize("name,closed_form", AREA_FORMS)
def test_area_form_literal(name, closed_form, report):
    worst = _area_mismatch(name, closed_form)
    ok = worst < 1e-8
    note = "" if name in ("ham-strip", "nontranslation") else "; expected failure, ledgered"
    report(9, f"dF^dG on {name} equals {closed_form} as stated", ok, f"max rel err={worst:.2e}{note}")
    assert ok


@pytest.mark.parametrize("name,closed_form", [
    ("nonham-strip", "-2*(1+y)^2*(2-4*y+3*y^2)*exp(2*x)"),
    ("three-seps", "dFdx"),
])
def test_area_form_corrected(name, closed_form, report):
    sc = builtin(name)
    if closed_form == "dFdx":
        worst = 0.0
        for p in sc.view.random(100, np.random.default_rng(9)):
            want = sc.F.grad(*p)[0]
            worst = max(worst, abs(area_density(sc.F, sc.G, p) - want) / abs(want))
    else:
        worst = _area_mismatch(name, closed_form)
    ok = worst < 1e-8
    report(9, f"dF^dG on {name} equals the corrected form {closed_form}", ok, f"max rel err={worst:.2e}")
    assert ok


# -- 10: stability under compactly supported bumps ------------------------------------------

STABILITY_CASES = [
    ("ham-strip", "exp(-x)/(1+y^2)", Mode.XiPrime),
    ("nonham-strip", "1", Mode.Xi),
    ("nontranslation", "1", Mode.Xi),
    ("three-seps", "1", Mode.Xi),
]
BUMP_AMPLITUDE = 10.0
BUMP_RADIUS = 0.02


def _bump(cx, cy):
    def b(x, y):
        r2 = ((x - cx) ** 2 + (y - cy) ** 2) / BUMP_RADIUS ** 2
        return BUMP_AMPLITUDE * math.exp(-1.0 / (1.0 - r2)) if r2 < 1.0 else 0.0
    return b


def _verdict(gc):
    table = tuple(gc.sobolev(l, p) for l in (0, 1) for p in (1.0, 2.0))
    return gc.r_hat, gc.log_flag, tuple("?" if v is INDETERMINATE else v for v in table)


@pytest.mark.parametrize("name,g,mode", STABILITY_CASES)
def test_bump_stability(name, g, mode, report):
    sc = builtin(name)
    rng = np.random.default_rng(10)
    changed = []
    for pair in sc.pairs:
        chart = ChartMap.for_pair(sc, pair, width=2.0 * DEFAULT_GERM.delta0)
        base = functools.lru_cache(maxsize=None)(chart_side_rhs(sc, ScalarField(parse(g)), mode, chart))
        ref = _verdict(classify_germ(phi_profile(sc, pair, base)))
        for _ in range(20):
            # centre at chart distance >= 0.05 from (a, b), inside the strip
            cx = pair.chart_offset(rng.uniform(0.05, 0.08))
            cy = rng.uniform(pair.b1 + BUMP_RADIUS, pair.b2 - BUMP_RADIUS)
            bump = _bump(cx, cy)
            got = _verdict(classify_germ(phi_profile(sc, pair, lambda x, y: base(x, y) + bump(x, y))))
            if got != ref:
                changed.append(((cx, cy), got))
    ok = not changed
    report(10, f"{name} verdicts invariant under 20 bumps per pair", ok,
           f"reference={ref}, changed={changed[:2]}")
    assert ok


# -- 11: integrator gates ------------------------------------------------------------------

# At the default tolerance 1e-10 the per-step error accumulates to ~1e-7 on
# the strip scenarios, so the drift gate runs the integrator at 1e-12.
TIGHT = IntegratorConfig(rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_first_integral_drift(name, report):
    sc = builtin(name)
    worst = 0.0
    for p in sc.view.random(100, np.random.default_rng(11)):
        F0 = sc.F(*p)
        traj = integrate(sc.xi, None, p, 10.0, sc.box, config=TIGHT)
        samples = traj.samples[:-1] if traj.terminal_event is Terminal.BoxExit else traj.samples
        for _, x, y, _ in samples:
            worst = max(worst, abs(sc.F(x, y) - F0) / (1.0 + abs(F0)))
    ok = worst < 1e-8
    report(11, f"first-integral drift on {name} over t in [0, 10]", ok, f"max drift={worst:.2e}")
    assert ok


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_chart_round_trip(name, report):
    sc = builtin(name)
    chart = ChartMap.for_pair(sc, sc.pairs[0])
    worst = 0.0
    for p in sc.view.random(1000, np.random.default_rng(12)):
        q = to_chart(sc.F, sc.G, p)
        worst = max(worst, math.dist(from_chart(chart, *q), p))
    ok = worst < 1e-9
    report(11, f"chart round trip on {name}, 1000 points", ok, f"max error={worst:.2e}")
    assert ok
