from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from divstab.conditions import STABILITY, ConditionSpec, IndefiniteDensityForStability, analyze_stability
from divstab.expr import ArityMismatch, Polynomial, evaluate, parse_polynomial
from divstab.field import (
    Explicit,
    NormPower,
    QuadFormPower,
    SymMatrix,
    VectorField,
    div_rho_f,
    divergence,
    gradient,
    grad_rho_dot_f,
    ldl_inertia,
    x_dot_f,
)

from oracles import field_to_sympy, finite_difference_divergence, rational_points, sym_divergence, symbols, to_sympy

V = ["x1", "x2", "x3"]
XS = symbols(3)
R2 = sp.Add(*[x**2 for x in XS])


def P(s):
    return parse_polynomial(s, V)


def test_divergence_values(spiral, quadratic, cubic):
    assert divergence(spiral) == P("-10*x3^2")
    assert divergence(quadratic) == P("-3 + 6*x1")
    assert divergence(cubic) == P("x1^2 + x2^2 - 11*x3^2")


@pytest.mark.parametrize("alpha", range(1, 9))
def test_weighted_divergences_of_spiral(spiral, alpha):
    q, m = div_rho_f(spiral, NormPower(alpha)).sign_form()
    assert q == P(f"-{4 * alpha + 10}*x3^2") and m == alpha
    q, m = div_rho_f(spiral, NormPower(alpha), inverse=True).sign_form()
    assert q == P(f"{4 * alpha - 10}*x3^2") and m == -alpha


@pytest.mark.parametrize("alpha", [1, 2, 3])
def test_div_rho_f_matches_sympy(quadratic, alpha):
    comps = field_to_sympy(quadratic, XS)
    for rho_sym, inverse in ((R2**alpha, False), (R2**-alpha, True)):
        ref = sum(sp.diff(rho_sym * c, x) for c, x in zip(comps, XS))
        ours = div_rho_f(quadratic, NormPower(alpha), inverse=inverse)
        for pt in rational_points(3, 5, seed=alpha):
            if not any(pt):
                continue
            val = ref.subs(dict(zip(XS, [sp.Rational(v.numerator, v.denominator) for v in pt])))
            assert evaluate(ours, pt) == Fraction(str(sp.nsimplify(val)))


def test_quadform_density_matches_sympy(spiral):
    Pm = SymMatrix([[2, Fraction(1, 2), 0], [Fraction(1, 2), 1, 0], [0, 0, 3]])
    S = to_sympy(Pm.quadform(), XS)
    comps = field_to_sympy(spiral, XS)
    ref = sp.expand(sum(sp.diff(S**2 * c, x) for c, x in zip(comps, XS)))
    ours = div_rho_f(spiral, QuadFormPower(Pm, 2))
    for pt in rational_points(3, 5, seed=7):
        val = ref.subs(dict(zip(XS, [sp.Rational(v.numerator, v.denominator) for v in pt])))
        assert evaluate(ours, pt) == Fraction(str(val))


def test_grad_rho_dot_f_for_explicit_density():
    f = VectorField(("x1", "x2"), (parse_polynomial("x1", ["x1", "x2"]), parse_polynomial("-x2", ["x1", "x2"])))
    rho = Explicit(parse_polynomial("1/2*x1^2 - 1/2*x2^2", ["x1", "x2"]))
    # grad rho . f = x1^2 + x2^2 = |x|^2
    assert grad_rho_dot_f(f, rho).sign_form() == (Polynomial.const(1, 2), 1)


def test_x_dot_f_and_gradient(spiral):
    assert x_dot_f(spiral) == P("-2*x1^2*x3^2 - 2*x2^2*x3^2 - 2*x3^4")
    g = gradient(P("x1^2*x2 + x3"), V)
    assert g.components == (P("2*x1*x2"), P("x1^2"), P("1"))


def test_arity_checks():
    with pytest.raises(ArityMismatch):
        VectorField(("x1", "x2"), (P("x1"),))


def test_ldl_inertia_examples():
    assert ldl_inertia([[1, 0], [0, 1]]) == (2, 0, 0)
    assert ldl_inertia([[0, 1], [1, 0]]) == (1, 1, 0)
    assert ldl_inertia([[1, 1], [1, 1]]) == (1, 0, 1)


def test_indefinite_quadform_rejected_for_stability():
    f = VectorField(("x1", "x2"), (parse_polynomial("-x1", ["x1", "x2"]), parse_polynomial("-x2", ["x1", "x2"])))
    rho = QuadFormPower(SymMatrix([[1, 2], [2, 1]]), 1)
    assert not rho.positive_definite
    with pytest.raises(IndefiniteDensityForStability):
        analyze_stability(f, rho, ConditionSpec(STABILITY, 1))


sym2 = st.tuples(*[st.integers(-4, 4)] * 3).map(lambda t: [[t[0], t[1]], [t[1], t[2]]])


@given(sym2)
def test_ldl_inertia_matches_eigenvalues(M):
    ev = np.linalg.eigvalsh(np.array(M, dtype=float))
    expected = (int(np.sum(ev > 1e-9)), int(np.sum(ev < -1e-9)), int(np.sum(np.abs(ev) <= 1e-9)))
    assert ldl_inertia([[Fraction(v) for v in r] for r in M]) == expected


coef = st.fractions(min_value=-3, max_value=3, max_denominator=4)
mono = st.tuples(*[st.integers(0, 2)] * 3)
fields = st.lists(st.dictionaries(mono, coef, max_size=4), min_size=3, max_size=3).map(
    lambda ds: VectorField(tuple(V), tuple(Polynomial(3, d) for d in ds))
)


@given(fields)
def test_divergence_matches_sympy_and_finite_differences(f):
    ref = sym_divergence(field_to_sympy(f, XS), XS)
    assert sp.expand(to_sympy(divergence(f), XS) - ref) == 0
    x = np.array([0.3, -0.7, 0.45])
    fd = finite_difference_divergence(lambda y: f.evaluate_many(y[None, :])[0], x)
    assert abs(fd - divergence(f).evaluate_many(x[None, :])[0]) < 1e-6


@given(fields, st.integers(1, 4))
def test_product_rule_for_norm_density(f, alpha):
    # div(w^a f) = w^a div f + a w^(a-1) * 2 x.f
    lhs = div_rho_f(f, NormPower(alpha))
    w = Polynomial.norm_sq(3)
    rhs = w ** (alpha - 1) * (w * divergence(f) + x_dot_f(f) * (2 * alpha))
    pt = [Fraction(1, 2), Fraction(-1, 3), Fraction(2)]
    assert evaluate(lhs, pt) == rhs.evaluate(pt)
