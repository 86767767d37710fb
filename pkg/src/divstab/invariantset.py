"""Exclusion of invariant closed sets of positive measure (Bendixson and Dulac tests in R^n)."""

from __future__ import annotations

from dataclasses import dataclass

from . import signcheck
from .expr import Polynomial
from .field import DensitySpec, Explicit, VectorField, div_rho_f


@dataclass(frozen=True)
class ExclusionVerdict:
    status: str  # "Excluded" | "Inapplicable" | "Undetermined"
    sign: str | None = None  # "Negative" | "Positive" when excluded
    reason: str = ""
    expression: Polynomial | None = None
    evidence: str | None = None

    @property
    def excluded(self) -> bool:
        return self.status == "Excluded"

    def summary(self) -> str:
        if self.excluded:
            return f"Excluded({self.sign}) {self.reason}".rstrip()
        if self.status == "Inapplicable":
            return f"Inapplicable({self.reason})"
        return f"Undetermined {self.reason}".rstrip()


def _decide(q: Polynomial, radius: float, names, samples: int, seed: int) -> ExclusionVerdict:
    if q.is_zero():
        return ExclusionVerdict("Inapplicable", reason="weighted divergence is identically zero", expression=q)
    # q is nonzero, so its zero set is a proper algebraic subset and has measure zero
    for required, sign in (("<=", "Negative"), (">=", "Positive")):
        v = signcheck.prove_sign(q, required, names)
        if v is not None:
            note = f"via {v.method}, zero set {v.zero_set_note or 'empty'}"
            return ExclusionVerdict("Excluded", sign, note, q)
    neg = signcheck.check_sign(q, "<=", radius, samples, seed, names)
    pos = signcheck.check_sign(q, ">=", radius, samples, seed + 1, names)
    if neg.refuted and pos.refuted:
        evidence = "sign changes in the region"
    else:
        evidence = "no sign change found by sampling, but no exact certificate"
    return ExclusionVerdict("Undetermined", reason=evidence, expression=q, evidence=evidence)


def dulac_check(
    f: VectorField,
    rho: DensitySpec,
    radius: float = 1.0,
    samples: int = signcheck.DEFAULT_SAMPLES,
    seed: int = 0,
) -> ExclusionVerdict:
    """Sign of ``div(rho f)`` on the ball, with norm factors cleared.

    Exact certificates are global, so an exclusion holds on every ball.
    """
    q, _ = div_rho_f(f, rho).sign_form()
    return _decide(q, radius, f.vars, samples, seed)


def bendixson_check(
    f: VectorField,
    radius: float = 1.0,
    samples: int = signcheck.DEFAULT_SAMPLES,
    seed: int = 0,
) -> ExclusionVerdict:
    return dulac_check(f, Explicit(Polynomial.const(1, f.n), positive_definite=True), radius, samples, seed)
