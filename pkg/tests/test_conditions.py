from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from divstab.conditions import (
    INSTABILITY,
    STABILITY,
    ConditionSpec,
    InstabilityRegion,
    NonEquilibrium,
    alpha_threshold,
    analyze_instability,
    analyze_stability,
    build_stability_condition,
    check_origin_limits,
    rantzer_baseline,
)
from divstab.expr import NormExpr, Polynomial, parse_polynomial
from divstab.field import Explicit, NormPower, VectorField

V = ["x1", "x2", "x3"]


def P(s, names=V):
    return parse_polynomial(s, names)


def spec(case, beta=None):
    return ConditionSpec(STABILITY, case, beta=beta)


@pytest.mark.parametrize("alpha", range(1, 9))
def test_spiral_case1_expression(spiral, alpha):
    prob = build_stability_condition(spiral, NormPower(alpha), spec(1))
    (clause,) = prob.clauses
    assert clause.expr.sign_form() == (P(f"-{4 * alpha}*x3^2"), alpha)
    rep = analyze_stability(spiral, NormPower(alpha), spec(1))
    assert rep.overall == "Holds" and rep.zero_set == "{x3=0}"
    assert rep.asymptotic == "off {x3=0}"


@pytest.mark.parametrize("beta", [1, 2, 3, Fraction(7, 2)])
def test_spiral_case3_threshold(spiral, beta):
    beta = Fraction(beta)
    rep = analyze_stability(spiral, NormPower(3), spec(3, beta))
    expected = 5 * (beta - 1) / (2 * (beta + 1))
    thresholds = [cr.threshold for cr in rep.clauses if cr.threshold]
    assert f"alpha > {expected}" in thresholds
    for alpha in range(1, 9):
        holds = analyze_stability(spiral, NormPower(alpha), spec(3, beta)).overall == "Holds"
        assert holds == (alpha > expected)


@pytest.mark.parametrize("alpha", range(3, 9))
def test_spiral_all_cases_agree_for_large_alpha(spiral, alpha):
    for case in (1, 2, 3, 4):
        assert analyze_stability(spiral, NormPower(alpha), spec(case)).overall == "Holds"


@pytest.mark.parametrize("alpha", [1, 2])
def test_spiral_inverse_clause_fails_below_three(spiral, alpha):
    assert analyze_stability(spiral, NormPower(alpha), spec(4)).overall != "Holds"


def test_quadratic_baseline_and_cases(quadratic):
    base = rantzer_baseline(quadratic, NormPower(3))
    assert base.overall == "Holds"
    (cr,) = base.clauses
    assert cr.clause.expr.sign_form() == (P("3"), -3)
    for case in (1, 2, 3, 4):
        rep = analyze_stability(quadratic, NormPower(3), spec(case))
        assert rep.overall != "Holds"


def test_quadratic_div_clause_witness(quadratic):
    rep = analyze_stability(quadratic, NormPower(3), spec(2))
    div = [cr for cr in rep.clauses if "div f" in cr.clause.label or cr.clause.expr.sign_form()[0] == P("-3 + 6*x1")]
    assert div and div[0].verdict.refuted and div[0].verdict.witness[0] > 0.5


def test_cubic_verdicts(cubic):
    assert analyze_stability(cubic, NormPower(3), spec(3)).overall == "Holds"
    rep2 = analyze_stability(cubic, NormPower(3), spec(2))
    assert rep2.overall == "Fails"
    base = rantzer_baseline(cubic, NormPower(3))
    assert base.overall == "Fails"
    assert base.clauses[0].verdict.refuted


def test_cubic_case4_threshold_is_eight(cubic):
    # inverse bracket is -12 at (1, 0, sqrt 5) for alpha=6, still indefinite at 7, positive from 8
    verdicts = {a: analyze_stability(cubic, NormPower(a), spec(4)).overall for a in range(1, 9)}
    assert [a for a, v in verdicts.items() if v == "Holds"] == [8]


def test_non_equilibrium_rejected():
    f = VectorField(("x1",), (parse_polynomial("1 - x1", ["x1"]),))
    with pytest.raises(NonEquilibrium):
        analyze_stability(f, NormPower(1), spec(1))


def test_instability_saddle():
    names = ["x1", "x2"]
    f = VectorField(tuple(names), (P("x1", names), P("-x2", names)))
    region = InstabilityRegion(1.0, Explicit(P("1/2*x1^2 - 1/2*x2^2", names)))
    rep = analyze_instability(f, region, ConditionSpec(INSTABILITY, 1))
    assert rep.overall == "Holds"
    assert rep.clauses[0].verdict.proven


def test_origin_limits_by_degree():
    (v,) = check_origin_limits([NormExpr(3, {3: P("2*x3^2")})])
    assert v.status == "Proven"
    (v,) = check_origin_limits([NormExpr(3, {-1: P("x1^2")})])
    assert v.status == "Fails"
    (v,) = check_origin_limits([None])
    assert v.status == "Undetermined"


def test_report_lines_are_stable(spiral):
    rep = analyze_stability(spiral, NormPower(3), spec(1))
    lines = dict(rep.lines(V))
    assert lines["overall"] == "Holds"
    assert lines["clause1.verdict"].startswith("Proven(EvenMonomial)")


@given(st.integers(1, 8), st.fractions(min_value=1, max_value=6, max_denominator=4))
def test_alpha_threshold_consistent_with_verdict(alpha, beta):
    from conftest import load

    f = load("spiral").field()
    rep = analyze_stability(f, NormPower(alpha), spec(3, beta))
    thr = [cr.threshold for cr in rep.clauses if cr.threshold and cr.threshold.startswith("alpha")]
    for t in thr:
        _, op, val = t.split()
        val = Fraction(val)
        ok = alpha > val if op == ">" else alpha >= val if op == ">=" else alpha < val if op == "<" else alpha <= val
        assert ok == (rep.overall == "Holds")
