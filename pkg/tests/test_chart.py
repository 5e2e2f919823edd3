import math

import numpy as np
import pytest

from cohomfield.chart import (ChartMap, Mode, SeparatrixPair, Side, from_chart, pushforward_rhs, to_chart,
                              transversal_rate, verify_inseparable)
from cohomfield.errors import OnSeparatrix, OutsideImage
from cohomfield.expr import parse
from cohomfield.field import ScalarField, area_density
from cohomfield.flow import IntegratorConfig, integrate
from cohomfield.scenarios import builtin


@pytest.fixture(scope="module")
def ham():
    return builtin("ham-strip")


@pytest.fixture(scope="module")
def ham_chart(ham):
    return ChartMap.for_pair(ham, ham.pairs[0])


def test_to_chart_examples(ham):
    assert to_chart(ham.F, ham.G, (0.0, 0.0)) == (-1.0, 0.0)
    nt = builtin("nontranslation")
    xp, yp = to_chart(nt.F, nt.G, (-1.0, 0.0))
    assert xp == pytest.approx(math.pi / 4, rel=1e-15) and yp == 0.0
    ts = builtin("three-seps")
    assert to_chart(ts.F, ts.G, (0.0, 0.0)) == (0.0, 0.0)


def test_from_chart_examples(ham_chart):
    x, y = from_chart(ham_chart, -1.0, 0.0)
    assert abs(x) < 1e-12 and abs(y) < 1e-12
    with pytest.raises(OutsideImage):
        from_chart(ham_chart, 1.0, 0.0)


def test_inverse_consistency_on_region(ham, ham_chart):
    x0, x1, y0, y1 = ham_chart.region
    worst = 0.0
    for xp in np.linspace(x0, x1, 51)[:-1]:
        for yp in np.linspace(y0, y1, 50):
            p = from_chart(ham_chart, xp, yp)
            q = to_chart(ham.F, ham.G, p)
            worst = max(worst, abs(q[0] - xp), abs(q[1] - yp))
    assert worst < 1e-9


def test_pushforward_examples(ham, ham_chart):
    g1 = ScalarField(parse("exp(-x)/(1+y^2)"))
    g2 = ScalarField(parse("exp(-x/2)/sqrt(1+y^2)"))
    lg = ScalarField(parse("-2*exp(x)*(1+y^2)"))
    for xp, yp in [(-0.5, 0.3), (-0.05, -0.9), (-0.9, 0.0)]:
        r = math.hypot(xp, yp)
        assert pushforward_rhs(ham, g1, Mode.XiPrime, xp, yp, ham_chart) == pytest.approx(1 / r, rel=1e-9)
        assert pushforward_rhs(ham, g2, Mode.XiPrime, xp, yp, ham_chart) == pytest.approx(r ** -0.5, rel=1e-9)
        assert pushforward_rhs(ham, lg, Mode.Xi, xp, yp, ham_chart) == pytest.approx(1.0, rel=1e-12)


def test_transversal_rate_closed_form(ham):
    lg = transversal_rate(ham)
    for x, y in [(0.0, 0.0), (1.0, 0.5), (-2.0, -2.0)]:
        assert lg(x, y) == pytest.approx(-2 * math.exp(x) * (1 + y * y), rel=1e-14)


def test_inseparable_pair(ham):
    rep = verify_inseparable(ham, ham.pairs[0], [1e-1, 1e-2, 1e-3])
    assert rep.ok and rep.converging
    # crossings of G = b2 approach a separatrix y = +-1
    y = rep.checks[-1].hit_b2[1]
    assert min(abs(y - 1.0), abs(y + 1.0)) < 1e-2


def test_inseparable_wrong_side(ham):
    rep = verify_inseparable(ham, ham.pairs[0], [1e-3], side=Side.Right)
    assert not rep.ok


def test_zero_offset_is_rejected(ham):
    with pytest.raises(OnSeparatrix):
        verify_inseparable(ham, ham.pairs[0], [1e-2, 0.0])


@pytest.mark.parametrize("name", ["nonham-strip", "nontranslation", "three-seps"])
def test_inseparable_builtins(name):
    sc = builtin(name)
    for pair in sc.pairs:
        assert verify_inseparable(sc, pair, [1e-1, 1e-2, 1e-3]).ok


def test_leaves_are_vertical_in_chart(ham):
    traj = integrate(ham.xi, None, (-0.4, 0.2), 3.0, ham.box, config=IntegratorConfig(rtol=1e-12, atol=1e-12))
    xs = [to_chart(ham.F, ham.G, (x, y))[0] for _, x, y, _ in traj.samples]
    assert max(xs) - min(xs) < 1e-8


def test_nonhamiltonian_jacobian_vanishes_toward_y_minus_one():
    sc = builtin("nonham-strip")
    chart = ChartMap.for_pair(sc, sc.pairs[0])
    dens = []
    for xp in (-1e-1, -1e-2, -1e-3, -1e-4):
        # G < 0 picks the separatrix y = -1 as F -> 0
        p = from_chart(chart, xp, -0.5)
        dens.append(abs(area_density(sc.F, sc.G, p)))
    assert all(a > b for a, b in zip(dens, dens[1:]))
    assert dens[-1] < 1e-2


def test_pair_invariants():
    with pytest.raises(ValueError):
        SeparatrixPair(0.0, 2.0, -1.0, 1.0, Side.Left, (0.0, 0.0))
    ham = builtin("ham-strip")
    bad = SeparatrixPair(0.0, 0.0, -1.0, 1.0, Side.Right, (0.0, 0.0))
    assert bad.check_anchor(ham.F, ham.G)
    assert not ham.pairs[0].check_anchor(ham.F, ham.G)
