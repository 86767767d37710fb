"""Vector fields, densities, and the weighted divergences built from them."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .expr import ArityMismatch, ExprError, NormExpr, Polynomial


class UnsupportedInverse(ExprError):
    """``div(rho^-1 f)`` requested for an explicit polynomial density."""


def default_names(n: int) -> tuple[str, ...]:
    return tuple(f"x{i + 1}" for i in range(n))


@dataclass(frozen=True)
class VectorField:
    vars: tuple[str, ...]
    components: tuple[Polynomial, ...]

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.vars) != len(self.components):
            raise ArityMismatch(f"{len(self.vars)} variables but {len(self.components)} components")
        for c in self.components:
            if c.nvars != len(self.vars):
                raise ArityMismatch("component arity does not match the variable list")

    @classmethod
    def from_polys(cls, components: Sequence[Polynomial], names: Sequence[str] | None = None) -> VectorField:
        return cls(tuple(names or default_names(len(components))), tuple(components))

    @property
    def n(self) -> int:
        return len(self.vars)

    def __add__(self, other: VectorField) -> VectorField:
        if self.vars != other.vars:
            raise ArityMismatch("fields over different variables")
        return VectorField(self.vars, tuple(a + b for a, b in zip(self.components, other.components)))

    def vanishes_at_origin(self) -> bool:
        return all(c.constant_term() == 0 for c in self.components)

    def lowdeg(self) -> int | None:
        degs = [c.lowdeg() for c in self.components if not c.is_zero()]
        return min(degs) if degs else None

    def evaluate(self, x):
        return [c.evaluate(x) for c in self.components]

    def evaluate_many(self, X: np.ndarray) -> np.ndarray:
        return np.column_stack([c.evaluate_many(X) for c in self.components])

    def compile(self):
        """Return a fast float callable ``x -> tuple`` for numerical integration."""
        args = [f"_a{i}" for i in range(self.n)]
        exprs = []
        for c in self.components:
            terms = []
            for m, coef in c.terms.items():
                fac = [repr(float(coef))]
                for a, e in zip(args, m):
                    if e == 1:
                        fac.append(a)
                    elif e:
                        fac.append(f"{a}**{e}")
                terms.append("*".join(fac))
            exprs.append(" + ".join(terms) if terms else "0.0")
        src = f"def _f({', '.join(args)}):\n    return ({', '.join(exprs)},)\n"
        ns: dict = {}
        exec(src, ns)  # noqa: S102 - source is generated from exact coefficients only
        fn = ns["_f"]
        return lambda x: fn(*x)

    def to_str(self) -> str:
        return "; ".join(f"{v}' = {c.to_str(self.vars)}" for v, c in zip(self.vars, self.components))


class SymMatrix:
    """Symmetric matrix with exact rational entries."""

    __slots__ = ("n", "entries")

    def __init__(self, rows: Sequence[Sequence]):
        n = len(rows)
        entries = tuple(tuple(Fraction(v) for v in row) for row in rows)
        if any(len(r) != n for r in entries):
            raise ArityMismatch("matrix must be square")
        for i in range(n):
            for j in range(i):
                if entries[i][j] != entries[j][i]:
                    raise ValueError(f"matrix is not symmetric at ({i}, {j})")
        self.n = n
        self.entries = entries

    @classmethod
    def from_array(cls, a: np.ndarray) -> SymMatrix:
        """Exact rational image of a float matrix, symmetrized."""
        a = np.asarray(a, dtype=float)
        a = 0.5 * (a + a.T)
        return cls([[Fraction(float(v)) for v in row] for row in a])

    @classmethod
    def identity(cls, n: int) -> SymMatrix:
        return cls([[1 if i == j else 0 for j in range(n)] for i in range(n)])

    def to_array(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.entries])

    def quadform(self) -> Polynomial:
        n = self.n
        terms = {}
        for i in range(n):
            for j in range(n):
                c = self.entries[i][j]
                if c:
                    m = [0] * n
                    m[i] += 1
                    m[j] += 1
                    terms[tuple(m)] = terms.get(tuple(m), 0) + c
        return Polynomial(n, terms)

    def is_positive_definite(self) -> bool:
        return ldl_inertia(self.entries)[0] == self.n

    def __eq__(self, other):
        return isinstance(other, SymMatrix) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self):
        return f"SymMatrix({[[str(v) for v in r] for r in self.entries]})"


def ldl_inertia(G: Sequence[Sequence[Fraction]]) -> tuple[int, int, int]:
    """Exact inertia ``(n_pos, n_neg, n_zero)`` of a symmetric rational matrix.

    Symmetric Gaussian elimination with diagonal pivoting, falling back to a
    2x2 congruence when every remaining diagonal entry vanishes.
    """
    A = [[Fraction(v) for v in row] for row in G]
    pos = neg = zero = 0
    while A:
        k = len(A)
        piv = next((i for i in range(k) if A[i][i] != 0), None)
        if piv is None:
            j = next(((i, j) for i in range(k) for j in range(i + 1, k) if A[i][j] != 0), None)
            if j is None:
                zero += k
                break
            # e_i + e_j turns a zero-diagonal pair with a_ij != 0 into a nonzero pivot
            i, jj = j
            for r in range(k):
                A[r][i] += A[r][jj]
            for c in range(k):
                A[i][c] += A[jj][c]
            continue
        d = A[piv][piv]
        if d > 0:
            pos += 1
        else:
            neg += 1
        row = A[piv]
        rest = [i for i in range(k) if i != piv]
        A = [[A[i][j] - A[i][piv] * row[j] / d for j in rest] for i in rest]
    return pos, neg, zero


# -- densities ----------------------------------------------------------------


@dataclass(frozen=True)
class NormPower:
    """``rho(x) = |x|^(2 alpha)``."""

    alpha: int

    def __post_init__(self):
        if int(self.alpha) != self.alpha or self.alpha < 1:
            raise ValueError("alpha must be a positive integer")

    positive_definite = True

    def weight(self, n: int) -> Polynomial:
        return Polynomial.norm_sq(n)

    def describe(self) -> str:
        return f"norm^{2 * self.alpha}"


@dataclass(frozen=True)
class QuadFormPower:
    """``rho(x) = (x^T P x)^alpha``."""

    P: SymMatrix
    alpha: int

    def __post_init__(self):
        if int(self.alpha) != self.alpha or self.alpha < 1:
            raise ValueError("alpha must be a positive integer")

    @property
    def positive_definite(self) -> bool:
        return self.P.is_positive_definite()

    def weight(self, n: int) -> Polynomial:
        if n != self.P.n:
            raise ArityMismatch(f"P is {self.P.n}x{self.P.n}, system has {n} variables")
        return self.P.quadform()

    def describe(self) -> str:
        return f"quadform^{self.alpha}"


@dataclass(frozen=True)
class Explicit:
    """Polynomial density, possibly sign-indefinite (instability analysis only)."""

    rho: Polynomial
    positive_definite: bool = False

    def weight(self, n: int) -> Polynomial:
        return Polynomial.norm_sq(n)

    def describe(self) -> str:
        return f"expr {self.rho}"


DensitySpec = NormPower | QuadFormPower | Explicit


# -- calculus -----------------------------------------------------------------


def gradient(p: Polynomial, names: Sequence[str] | None = None) -> VectorField:
    return VectorField(tuple(names or default_names(p.nvars)), tuple(p.diff(i) for i in range(p.nvars)))


def divergence(f: VectorField) -> Polynomial:
    total = Polynomial.zero(f.n)
    for i, c in enumerate(f.components):
        total = total + c.diff(i)
    return total


def dot(u: Sequence[Polynomial], v: Sequence[Polynomial]) -> Polynomial:
    total = Polynomial.zero(u[0].nvars)
    for a, b in zip(u, v):
        total = total + a * b
    return total


def x_dot_f(f: VectorField) -> Polynomial:
    return dot([Polynomial.var(i, f.n) for i in range(f.n)], f.components)


def _weight_parts(f: VectorField, rho: NormPower | QuadFormPower):
    w = rho.weight(f.n)
    gw_f = dot(gradient(w).components, f.components)
    return w, gw_f


def grad_rho_dot_f(f: VectorField, rho: DensitySpec) -> NormExpr:
    """``grad(rho) . f``."""
    if isinstance(rho, Explicit):
        return NormExpr.from_poly(dot(gradient(rho.rho).components, f.components))
    w, gw_f = _weight_parts(f, rho)
    return NormExpr(f.n, {rho.alpha - 1: gw_f * rho.alpha}, w)


def rho_div_f(f: VectorField, rho: DensitySpec) -> NormExpr:
    """``rho * div(f)``."""
    d = divergence(f)
    if isinstance(rho, Explicit):
        return NormExpr.from_poly(rho.rho * d)
    return NormExpr(f.n, {rho.alpha: d}, rho.weight(f.n))


def rho_sq_div_inv(f: VectorField, rho: DensitySpec) -> NormExpr:
    """``rho^2 div(rho^-1 f) = rho div(f) - grad(rho) . f``; polynomial for explicit densities."""
    return (rho_div_f(f, rho) - grad_rho_dot_f(f, rho)).collapse()


def div_rho_f(f: VectorField, rho: DensitySpec, inverse: bool = False) -> NormExpr:
    """``div(rho f)``, or ``div(rho^-1 f)`` when ``inverse`` (valid off the origin)."""
    if isinstance(rho, Explicit):
        if inverse:
            raise UnsupportedInverse("div(rho^-1 f) is rational for explicit densities; use rho_sq_div_inv")
        return (grad_rho_dot_f(f, rho) + rho_div_f(f, rho)).collapse()
    w, gw_f = _weight_parts(f, rho)
    d = divergence(f)
    a = rho.alpha
    if inverse:
        return NormExpr(f.n, {-a - 1: gw_f * (-a) + w * d}, w)
    return NormExpr(f.n, {a - 1: gw_f * a + w * d}, w)


def density_expr(rho: DensitySpec, n: int) -> NormExpr:
    if isinstance(rho, Explicit):
        return NormExpr.from_poly(rho.rho)
    return NormExpr(n, {rho.alpha: Polynomial.const(1, n)}, rho.weight(n))
