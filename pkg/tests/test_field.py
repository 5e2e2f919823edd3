import math

import numpy as np
import pytest

from cohomfield.errors import DegenerateTransversal, DomainFault
from cohomfield.expr import parse
from cohomfield.field import (Box, PlaneVectorField, ScalarField, area_density, audit_regularity, derived_fields,
                              lie_derivative)
from cohomfield.scenarios import BUILTIN_NAMES, builtin


@pytest.fixture(scope="module")
def ham():
    return builtin("ham-strip")


def test_lie_derivative_examples(ham):
    assert abs(lie_derivative(ham.xi, ham.F, (0.3, -0.7))) < 1e-15
    weak = ScalarField(parse("x+ln(abs(1-y^2))"))
    assert abs(lie_derivative(ham.xi, weak, (1.0, 0.5))) < 1e-15
    assert lie_derivative(ham.xi, ham.G, (0.0, 0.0)) == -2.0


def test_lie_derivative_propagates_domain_fault(ham):
    with pytest.raises(DomainFault):
        lie_derivative(ham.xi, ScalarField(parse("ln(abs(1-y))")), (0.0, 1.0))


def test_area_density_examples(ham):
    assert area_density(ham.F, ham.G, (0.0, 0.0)) == 2.0
    nt = builtin("nontranslation")
    assert area_density(nt.F, nt.G, (-1.0, 0.0)) == pytest.approx(0.5, rel=1e-14)


def test_derived_fields_examples(ham):
    d = derived_fields(ham.xi, ham.F, ham.G, ham.view)
    px, py = d.xi_F(0.0, 0.0)
    assert px == 0.0 and py == -0.5
    assert d.transversal_sign == -1
    ts = builtin("three-seps")
    d3 = derived_fields(ts.xi, ts.F, ts.G, ts.view)
    for x, y in ts.view.random(50, np.random.default_rng(1)):
        assert d3.xi_F(x, y) == pytest.approx(ts.xi(x, y), rel=1e-14)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_derived_field_identities(name):
    sc = builtin(name)
    d = derived_fields(sc.xi, sc.F, sc.G, sc.view)
    rng = np.random.default_rng(2)
    for x, y in sc.view.random(100, rng):
        # xi'_F kills F and raises G at unit rate
        assert abs(lie_derivative(d.xi_F, sc.F, (x, y))) < 1e-10 * (1 + math.hypot(*sc.F.grad(x, y)) * math.hypot(*d.xi_F(x, y)))
        assert lie_derivative(d.xi_F, sc.G, (x, y)) == pytest.approx(1.0, abs=1e-12)
        # parallel to the Hamiltonian field of F for dF^dG
        w = area_density(sc.F, sc.G, (x, y))
        fx, fy = sc.F.grad(x, y)
        hx, hy = fy / w, -fx / w
        px, py = d.xi_F(x, y)
        assert abs(px * hy - py * hx) <= 1e-10 * math.hypot(px, py) * math.hypot(hx, hy)
        if w != 0.0 and abs(w) > 1e-6:
            assert lie_derivative(d.xi_G, sc.F, (x, y)) == pytest.approx(1.0, abs=1e-10)
            assert abs(lie_derivative(d.xi_G, sc.G, (x, y))) < 1e-10


def test_derived_fields_rejects_vanishing_transversal(ham):
    bad = ScalarField(parse("x"))
    with pytest.raises(DegenerateTransversal):
        derived_fields(ham.xi, ham.F, bad, ham.view)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_builtin_fields_are_regular(name):
    sc = builtin(name)
    audit = audit_regularity(sc.xi, sc.F, sc.view)
    assert audit.field_regular and audit.min_speed_sq > 0


def test_nonhamiltonian_F_degenerates_on_y_minus_one():
    sc = builtin("nonham-strip")
    audit = audit_regularity(sc.xi, sc.F, sc.view)
    assert not audit.F_regular
    assert audit.degeneracy_locus
    assert all(abs(y + 1.0) < 1e-4 for _, y in audit.degeneracy_locus)


def test_zero_field_is_not_regular():
    audit = audit_regularity(PlaneVectorField(parse("0"), parse("0")), ScalarField(parse("x")), Box(-1, 1, -1, 1))
    assert not audit.field_regular


def test_box():
    b = Box(0, 1, 2, 3)
    assert b.contains(0.5, 2.5) and not b.contains(1.5, 2.5)
    assert len(b.grid(3, 4)) == 12
    with pytest.raises(ValueError):
        Box(1, 0, 0, 1)
