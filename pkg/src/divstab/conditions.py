"""Sign obligations for the divergence-based stability and instability tests.

Every clause is reduced to "polynomial has sign s off the origin": positive
weights ``w^m`` and ``rho^2`` are divided out before the sign check, so
no rational function is ever formed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import signcheck
from .expr import ExprError, NormExpr, Polynomial
from .field import (
    DensitySpec,
    Explicit,
    NormPower,
    QuadFormPower,
    VectorField,
    div_rho_f,
    divergence,
    dot,
    gradient,
    grad_rho_dot_f,
    rho_div_f,
    rho_sq_div_inv,
)
from .sampling import chunk_rng, uniform_ball
from .signcheck import EmptyU, SignVerdict

STABILITY = "stability"
INSTABILITY = "instability"
CONTROL = "control"


class ConditionError(ExprError):
    pass


class NonEquilibrium(ConditionError):
    pass


class IndefiniteDensityForStability(ConditionError):
    pass


class RhoNotZeroAtOrigin(ConditionError):
    pass


@dataclass(frozen=True)
class ConditionSpec:
    kind: str
    case_id: int
    beta: Fraction | None = None
    strict: bool = True

    def __post_init__(self):
        if self.kind not in (STABILITY, INSTABILITY, CONTROL):
            raise ValueError(f"unknown condition kind {self.kind!r}")
        if self.case_id not in (1, 2, 3, 4):
            raise ValueError("case_id must be 1..4")
        if self.case_id == 3:
            beta = Fraction(1) if self.beta is None else Fraction(self.beta)
            if beta < 1:
                raise ValueError("beta must be >= 1")
            object.__setattr__(self, "beta", beta)
        elif self.beta is not None:
            object.__setattr__(self, "beta", None)


@dataclass(frozen=True)
class InstabilityRegion:
    r: float
    rho: DensitySpec

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("ball radius must be positive")


@dataclass(frozen=True)
class Clause:
    label: str
    expr: NormExpr
    required: str
    region: str
    # (a, b) with expr = w^k (alpha*a + b) for power densities; used for alpha thresholds
    bracket: tuple[Polynomial, Polynomial] | None = None
    alpha_free: bool = False

    def sign_polynomial(self) -> Polynomial:
        return self.expr.sign_form()[0]


@dataclass(frozen=True)
class Obligation:
    label: str
    expr: NormExpr | None


@dataclass(frozen=True)
class ConditionProblem:
    spec: ConditionSpec
    clauses: tuple[Clause, ...]
    obligations: tuple[Obligation, ...]
    notes: tuple[str, ...] = ()
    rho_sign: Polynomial | None = None  # restriction polynomial of U for instability


@dataclass(frozen=True)
class LimitVerdict:
    label: str
    status: str  # "Proven" | "Fails" | "Undetermined"
    detail: str


@dataclass(frozen=True)
class ClauseResult:
    clause: Clause
    verdict: SignVerdict
    threshold: str | None = None


@dataclass
class ConditionReport:
    spec: ConditionSpec
    density: str
    clauses: list[ClauseResult]
    origin: list[LimitVerdict]
    overall: str
    empirical: bool = False
    zero_set: str | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.overall in ("Holds", "HoldsOnSamples")

    @property
    def asymptotic(self) -> str:
        if not self.holds:
            return "n/a"
        if not self.spec.strict:
            return "not checked"
        return f"off {self.zero_set}" if self.zero_set else "yes"

    def lines(self, names: Sequence[str]) -> list[tuple[str, str]]:
        out = [("overall", self.overall)]
        if self.spec.beta is not None:
            out.append(("beta", str(self.spec.beta)))
        out.append(("asymptotic", self.asymptotic))
        for k, cr in enumerate(self.clauses, 1):
            c = cr.clause
            out.append((f"clause{k}", f"{c.label} {c.required} 0 on {c.region}"))
            out.append((f"clause{k}.expression", c.expr.normalize().to_str(names)))
            out.append((f"clause{k}.verdict", cr.verdict.summary()))
            if cr.threshold:
                out.append((f"clause{k}.alpha_threshold", cr.threshold))
        for k, lv in enumerate(self.origin, 1):
            out.append((f"origin{k}", f"{lv.label}: {lv.status} ({lv.detail})"))
        for k, note in enumerate(self.notes, 1):
            out.append((f"note{k}", note))
        return out


# -- expression pieces ----------------------------------------------------------


class _Pieces:
    """The handful of expressions every case is assembled from."""

    def __init__(self, f: VectorField, rho: DensitySpec):
        self.f, self.rho = f, rho
        self.power = not isinstance(rho, Explicit)
        self.G = grad_rho_dot_f(f, rho)
        self.RD = rho_div_f(f, rho)
        self.I = rho_sq_div_inv(f, rho)
        self.D = divergence(f)
        self.div_rho = (self.G + self.RD).collapse()
        if self.power:
            w = rho.weight(f.n)
            self.gw_f = dot(gradient(w).components, f.components)
            self.wD = w * self.D
            self.div_inv = div_rho_f(f, rho, inverse=True)
            self.w = w
        else:
            self.div_inv = None

    def bracket(self, a_coef, b_coef, inverse=False):
        if not self.power:
            return None
        a = self.gw_f * a_coef
        b = self.wD * b_coef
        return (-a, b) if inverse else (a, b)

    def rho_div_inv(self) -> NormExpr | None:
        """``rho * div(rho^-1 f)``; rational (``None``) for explicit densities."""
        if not self.power:
            return None
        return self.div_inv.shift(self.rho.alpha)


def _div_clause(p: _Pieces, required: str, region: str) -> Clause:
    return Clause("div{f}", NormExpr.from_poly(p.D), required, region, alpha_free=True)


def _inverse_clause(p: _Pieces, required: str, region: str) -> Clause:
    if p.power:
        return Clause("div{rho^-1 f}", p.div_inv, required, region, p.bracket(1, 1, inverse=True))
    return Clause("rho^2 div{rho^-1 f}", p.I, required, region)


def _case3_expr(p: _Pieces, beta: Fraction) -> NormExpr:
    return (p.G.scale(1 + beta) + p.RD.scale(1 - beta)).collapse()


def _rho_positive_definite(rho: DensitySpec) -> bool:
    return bool(rho.positive_definite)


def build_stability_condition(f: VectorField, rho: DensitySpec, spec: ConditionSpec) -> ConditionProblem:
    """Clauses (on D minus the origin) and origin obligations for one sufficient case."""
    if not f.vanishes_at_origin():
        raise NonEquilibrium("f(0) != 0")
    if not _rho_positive_definite(rho):
        raise IndefiniteDensityForStability("stability conditions need a positive definite density")
    p = _Pieces(f, rho)
    le, ge = ("<", ">") if spec.strict else ("<=", ">=")
    region = "D\\{0}"
    notes = []
    at_zero = Obligation("div{rho f} at 0", p.div_rho)
    rho_inv_lim = Obligation("lim rho div{rho^-1 f}", p.rho_div_inv())
    if spec.case_id == 1:
        clauses = [Clause("div{rho f} - rho div{f}", p.G, le, region, p.bracket(1, 0))]
        obligations = [at_zero]
    elif spec.case_id == 2:
        clauses = [_inverse_clause(p, ge, region), _div_clause(p, "<=", region)]
        obligations = [Obligation("lim rho^2 div{rho^-1 f}", p.I)]
    elif spec.case_id == 3:
        beta = spec.beta
        clauses = [
            Clause(
                f"div{{rho f}} - {beta} rho^2 div{{rho^-1 f}}",
                _case3_expr(p, beta),
                le,
                region,
                p.bracket(1 + beta, 1 - beta),
            )
        ]
        if beta > 1:
            clauses.append(_div_clause(p, "<=", region))
        obligations = [at_zero, rho_inv_lim]
    else:
        clauses = [
            Clause("div{rho f}", p.div_rho, le, region, p.bracket(1, 1)),
            _inverse_clause(p, ge, region),
        ]
        obligations = [at_zero, rho_inv_lim]
        notes.append("both origin limits required (conservative reading)")
    return ConditionProblem(spec, tuple(clauses), tuple(obligations), tuple(notes))


def _u_sign_polynomial(rho: DensitySpec, n: int) -> Polynomial:
    if isinstance(rho, Explicit):
        return rho.rho
    return Polynomial.const(1, n)


def _u_nonempty(rho_sign: Polynomial, r: float, seed: int = 0) -> bool:
    X = uniform_ball(chunk_rng(seed, 0), 4096, rho_sign.nvars, r / 10)
    return bool(np.any(rho_sign.evaluate_many(X) > 0))


def build_instability_condition(f: VectorField, region: InstabilityRegion, spec: ConditionSpec) -> ConditionProblem:
    """Clauses required on ``U = {|x| <= r, rho > 0}`` for one instability case."""
    if not f.vanishes_at_origin():
        raise NonEquilibrium("f(0) != 0")
    rho = region.rho
    n = f.n
    if isinstance(rho, Explicit) and rho.rho.constant_term() != 0:
        raise RhoNotZeroAtOrigin("rho(0) != 0")
    rho_sign = _u_sign_polynomial(rho, n)
    if not _u_nonempty(rho_sign, region.r):
        raise EmptyU(f"rho > 0 not found within radius {region.r / 10}")
    p = _Pieces(f, rho)
    U = "U"
    notes = []
    if spec.case_id == 1:
        clauses = [Clause("div{rho f} - rho div{f}", p.G, ">", U, p.bracket(1, 0))]
    elif spec.case_id == 2:
        clauses = [_inverse_clause(p, "<", U), _div_clause(p, ">=", U)]
        if p.D.is_zero():
            notes.append("div{f} is identically zero on U: the non-strict reading (>= 0) is used")
    elif spec.case_id == 3:
        beta = spec.beta
        clauses = [
            Clause(
                f"div{{rho f}} - {beta} rho^2 div{{rho^-1 f}}",
                _case3_expr(p, beta),
                ">",
                U,
                p.bracket(1 + beta, 1 - beta),
            )
        ]
        if beta > 1:
            clauses.append(_div_clause(p, ">=", U))
    else:
        clauses = [Clause("div{rho f}", p.div_rho, ">", U, p.bracket(1, 1)), _inverse_clause(p, "<", U)]
    return ConditionProblem(spec, tuple(clauses), (), tuple(notes), rho_sign)


def check_origin_limits(exprs: Sequence[NormExpr | None]) -> list[LimitVerdict]:
    """Decide ``lim_{x->0} e(x) = 0`` by degree counting on ``w^m q``."""
    out = []
    for e in exprs:
        label = ""
        if isinstance(e, Obligation):
            label, e = e.label, e.expr
        if e is None:
            out.append(LimitVerdict(label, "Undetermined", "rational expression"))
            continue
        q, m = e.sign_form()
        if q.is_zero():
            out.append(LimitVerdict(label, "Proven", "identically zero"))
            continue
        order = 2 * m + q.lowdeg()
        if order > 0:
            out.append(LimitVerdict(label, "Proven", f"vanishes to order {order}"))
        else:
            out.append(LimitVerdict(label, "Fails", f"order {order} <= 0"))
    return out


# -- alpha thresholds -----------------------------------------------------------


def _fmt(x: Fraction) -> str:
    return str(x)


def alpha_threshold(clause: Clause, names: Sequence[str] | None = None) -> str | None:
    """Exact range of ``alpha`` for which a power-density clause holds.

    Derived when the clause reduces to ``(alpha + lam) * a`` with ``a`` of
    provable sign, otherwise ``None``.
    """
    if clause.alpha_free or clause.bracket is None:
        return None
    a, b = clause.bracket
    strict = clause.required in ("<", ">")
    want_neg = clause.required in ("<", "<=")
    if a.is_zero():
        return "independent of alpha"
    m0, c0 = a.leading_term()
    lam = b.terms.get(m0, Fraction(0)) / c0
    if b != a * lam:
        return None
    a_q = NormExpr.from_poly(a).sign_form()[0]
    if signcheck.prove_sign(a_q, "<=", names):
        a_neg = True
    elif signcheck.prove_sign(a_q, ">=", names):
        a_neg = False
    else:
        return None
    # sign(alpha*a + b) = sign(alpha + lam) * sign(a)
    need_positive = want_neg == a_neg
    op = (">" if strict else ">=") if need_positive else ("<" if strict else "<=")
    return f"alpha {op} {_fmt(-lam)}"


# -- evaluation -------------------------------------------------------------------


def evaluate_problem(
    problem: ConditionProblem,
    density: str,
    names: Sequence[str] | None = None,
    radius: float | None = 1.0,
    samples: int = signcheck.DEFAULT_SAMPLES,
    seed: int = 0,
    empirical: bool = False,
    workers: int = 1,
) -> ConditionReport:
    results = []
    for k, clause in enumerate(problem.clauses):
        q = clause.sign_polynomial()
        sub_seed = seed + 7919 * k
        if problem.rho_sign is not None:
            v = signcheck.check_sign_on_U(q, problem.rho_sign, clause.required, radius or 1.0, samples, sub_seed, names, workers)
        else:
            v = signcheck.check_sign(q, clause.required, radius, samples, sub_seed, names, workers)
        results.append(ClauseResult(clause, v, alpha_threshold(clause, names)))
    origin = check_origin_limits(list(problem.obligations))
    verdicts = [r.verdict for r in results]
    if any(v.refuted for v in verdicts) or any(o.status == "Fails" for o in origin):
        overall = "Fails"
    elif all(v.proven for v in verdicts) and all(o.status == "Proven" for o in origin):
        overall = "Holds"
    elif empirical and all(o.status != "Fails" for o in origin):
        overall = "HoldsOnSamples"
    else:
        overall = "Undetermined"
    zero_sets = []
    for r in results:
        note = r.verdict.zero_set_note
        if r.clause.required in ("<", ">") and r.verdict.proven and note not in (None, "{0}"):
            zero_sets.append(note)
    notes = list(problem.notes)
    if empirical and overall == "HoldsOnSamples":
        notes.append("empirical mode: unrefuted sampled clauses accepted")
    return ConditionReport(
        problem.spec,
        density,
        results,
        origin,
        overall,
        empirical,
        " u ".join(dict.fromkeys(zero_sets)) or None,
        notes,
    )


def analyze_stability(f: VectorField, rho: DensitySpec, spec: ConditionSpec, **kw) -> ConditionReport:
    problem = build_stability_condition(f, rho, spec)
    return evaluate_problem(problem, rho.describe(), f.vars, **kw)


def analyze_instability(f: VectorField, region: InstabilityRegion, spec: ConditionSpec, **kw) -> ConditionReport:
    problem = build_instability_condition(f, region, spec)
    kw.setdefault("radius", region.r)
    return evaluate_problem(problem, region.rho.describe(), f.vars, **kw)


def rantzer_baseline(f: VectorField, rho: DensitySpec, **kw) -> ConditionReport:
    """Sign part of the almost-everywhere convergence test: ``div(rho^-1 f) > 0`` off the origin."""
    if not f.vanishes_at_origin():
        raise NonEquilibrium("f(0) != 0")
    if not _rho_positive_definite(rho):
        raise IndefiniteDensityForStability("baseline needs a positive definite density")
    p = _Pieces(f, rho)
    spec = ConditionSpec(STABILITY, 2, strict=True)
    problem = ConditionProblem(
        spec,
        (_inverse_clause(p, ">", "D\\{0}"),),
        (),
        ("integrability of div{rho^-1 f} is assumed, not decided",),
    )
    return evaluate_problem(problem, rho.describe(), f.vars, **kw)
