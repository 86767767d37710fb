from fractions import Fraction

import numpy as np
import pytest

from divstab.conditions import STABILITY, ConditionSpec, analyze_stability
from divstab.control import (
    ControlSystem,
    SynthesisTemplate,
    TemplateTooLarge,
    converges_in_simulation,
    synthesize,
    verify_control,
)
from divstab.expr import ArityMismatch, Polynomial, parse_polynomial
from divstab.field import NormPower, VectorField
from divstab.sampling import chunk_rng, uniform_ball
from divstab.sim import SPEED, simulate

N2 = ["x1", "x2"]


def P(s):
    return parse_polynomial(s, N2)


def plant(d):
    xi = VectorField(tuple(N2), (P(f"{d}*x2 - x1*x2^2"), P("0")))
    return ControlSystem(xi, [[P("0")], [P("1")]])


def case3(beta):
    return ConditionSpec(STABILITY, 3, beta=beta)


def test_closed_loop_assembly():
    sys = plant(1).with_u([P("-x1 - x2^3")])
    f = sys.closed_loop()
    assert f.components == (P("x2 - x1*x2^2"), P("-x1 - x2^3"))


def test_verify_matches_direct_analysis():
    sys = plant(0).with_u([P("-x2^3")])
    a = verify_control(sys, NormPower(2), case3(1))
    b = analyze_stability(sys.closed_loop(), NormPower(2), case3(1))
    assert a.lines(N2) == b.lines(N2)


@pytest.mark.parametrize("alpha", range(1, 9))
def test_plant_d0(alpha):
    rep = verify_control(plant(0).with_u([P("-x2^3")]), NormPower(alpha), case3(1))
    assert rep.overall == "Holds"
    assert rep.asymptotic == "off {x2=0}"


def test_plant_d1_threshold():
    rep = verify_control(plant(1).with_u([P("-x1 - x2^3")]), NormPower(1), case3(2))
    assert rep.overall == "Holds"
    assert "alpha > 2/3" in [cr.threshold for cr in rep.clauses]


def test_zero_control():
    assert verify_control(plant(1).with_u([P("0")]), NormPower(2), case3(2)).overall != "Holds"
    # d = 0, u = 0 is certified only non-strictly: every point of {x2 = 0} is an equilibrium
    rep = verify_control(plant(0).with_u([P("0")]), NormPower(2), case3(1))
    assert rep.overall == "Holds" and "{x2=0}" in rep.zero_set
    assert not converges_in_simulation(plant(0).closed_loop([P("0")]), starts=5)


def test_synthesis_recovers_cubic_damping():
    monos = (P("x2"), P("x2^3"))
    template = SynthesisTemplate((monos,), range(-2, 3), beta=1, alpha_range=(2,))
    res = synthesize(plant(0), template)
    assert res.u == (P("-x2^3"),)
    assert res.coefficients == (0, -1)
    assert res.alpha == 2


def test_template_limits():
    monos = tuple(Polynomial.var(0, 2) ** k for k in range(1, 8))
    with pytest.raises(TemplateTooLarge):
        SynthesisTemplate((monos,), range(-2, 3))
    with pytest.raises(ArityMismatch):
        ControlSystem(plant(0).xi, [[P("1")]])


def test_template_enumeration_is_lexicographic():
    t = SynthesisTemplate(((P("x1"), P("x2")),), [Fraction(-1), Fraction(1)])
    assert list(t.combinations()) == [(-1, -1), (-1, 1), (1, -1), (1, 1)]


def test_closed_loop_converges_from_random_starts():
    f = plant(0).closed_loop([P("-x2^3")])
    X = uniform_ball(chunk_rng(0, 0), 100, 2, 1.0)
    kinds = [simulate(f, x0, T=100.0, tol=1e-8, rescale=SPEED).classification.kind for x0 in X]
    assert kinds.count("ConvergedToOrigin") == 100
