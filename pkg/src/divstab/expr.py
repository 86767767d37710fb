"""Exact multivariate polynomials, norm-weighted sums, and the polynomial parser.

Coefficients are :class:`fractions.Fraction`; floats only appear at the
evaluation boundary (:meth:`Polynomial.evaluate_many`).
"""

from __future__ import annotations

import re
from fractions import Fraction
from numbers import Rational
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

Monomial = tuple[int, ...]


class ExprError(Exception):
    """Base class for algebra errors."""


class ArityMismatch(ExprError):
    pass


class IndexOutOfRange(ExprError):
    pass


class EvalAtOriginWithNegativePower(ExprError):
    pass


class ParseError(ExprError):
    """Malformed polynomial source; ``position`` is a 0-based column."""

    def __init__(self, position: int, message: str):
        super().__init__(f"at position {position}: {message}")
        self.position = position
        self.message = message


class UnknownVariable(ParseError):
    def __init__(self, position: int, name: str):
        super().__init__(position, f"unknown variable {name!r}")
        self.name = name


class NonIntegerExponent(ParseError):
    pass


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    if isinstance(c, float):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    raise TypeError(f"cannot use {type(c).__name__} as an exact coefficient")


def _grlex_key(mono: Monomial):
    return (sum(mono), mono)


class Polynomial:
    """Immutable polynomial in ``nvars`` variables with rational coefficients."""

    __slots__ = ("nvars", "_terms", "_hash")

    def __init__(self, nvars: int, terms: Mapping[Monomial, object] | Iterable = ()):
        if nvars < 1:
            raise ValueError("nvars must be positive")
        items = terms.items() if isinstance(terms, Mapping) else terms
        clean: dict[Monomial, Fraction] = {}
        for mono, c in items:
            mono = tuple(int(e) for e in mono)
            if len(mono) != nvars:
                raise ArityMismatch(f"exponent vector {mono} has length != {nvars}")
            if any(e < 0 for e in mono):
                raise ValueError(f"negative exponent in {mono}")
            c = _as_fraction(c)
            if c:
                c = clean.get(mono, 0) + c
                if c:
                    clean[mono] = c
                else:
                    clean.pop(mono, None)
        self.nvars = nvars
        self._terms = clean
        self._hash = None

    # construction helpers
    @classmethod
    def zero(cls, nvars: int) -> Polynomial:
        return cls(nvars)

    @classmethod
    def const(cls, value, nvars: int) -> Polynomial:
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def var(cls, index: int, nvars: int) -> Polynomial:
        if not 0 <= index < nvars:
            raise IndexOutOfRange(index)
        mono = tuple(1 if i == index else 0 for i in range(nvars))
        return cls(nvars, {mono: 1})

    @classmethod
    def norm_sq(cls, nvars: int) -> Polynomial:
        """``x1^2 + ... + xn^2``."""
        return cls(nvars, {tuple(2 if i == j else 0 for j in range(nvars)): 1 for i in range(nvars)})

    @classmethod
    def _raw(cls, nvars: int, terms: dict) -> Polynomial:
        p = object.__new__(cls)
        p.nvars = nvars
        p._terms = terms
        p._hash = None
        return p

    # accessors
    @property
    def terms(self) -> Mapping[Monomial, Fraction]:
        return MappingProxyType(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def constant_term(self) -> Fraction:
        return self._terms.get((0,) * self.nvars, Fraction(0))

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(m) for m in self._terms), default=-1)

    def lowdeg(self) -> int | None:
        """Lowest total degree among the terms, ``None`` for zero."""
        return min((sum(m) for m in self._terms), default=None)

    def is_homogeneous(self) -> bool:
        return len({sum(m) for m in self._terms}) <= 1

    def homogeneous_part(self, d: int) -> Polynomial:
        return Polynomial._raw(self.nvars, {m: c for m, c in self._terms.items() if sum(m) == d})

    def leading_term(self) -> tuple[Monomial, Fraction]:
        mono = max(self._terms, key=_grlex_key)
        return mono, self._terms[mono]

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        return sorted(self._terms.items(), key=lambda mc: _grlex_key(mc[0]), reverse=True)

    # equality
    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.nvars == other.nvars and self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self == Polynomial.const(other, self.nvars)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.nvars, frozenset(self._terms.items())))
        return self._hash

    # arithmetic
    def _coerce(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ArityMismatch(f"{self.nvars} vs {other.nvars} variables")
            return other
        if isinstance(other, (int, Fraction, Rational)):
            return Polynomial.const(other, self.nvars)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            v = out.get(m, 0) + c
            if v:
                out[m] = v
            else:
                out.pop(m, None)
        return Polynomial._raw(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw(self.nvars, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, Rational)):
            c0 = Fraction(other)
            if not c0:
                return Polynomial.zero(self.nvars)
            return Polynomial._raw(self.nvars, {m: c * c0 for m, c in self._terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict[Monomial, Fraction] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out.get(m, 0) + c1 * c2
        return Polynomial._raw(self.nvars, {m: c for m, c in out.items() if c})

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("polynomial powers must be non-negative integers")
        result = Polynomial.const(1, self.nvars)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def diff(self, var_index: int) -> Polynomial:
        """Exact partial derivative with respect to variable ``var_index``."""
        if not 0 <= var_index < self.nvars:
            raise IndexOutOfRange(f"variable index {var_index} not in [0, {self.nvars})")
        out = {}
        for m, c in self._terms.items():
            e = m[var_index]
            if e:
                mm = list(m)
                mm[var_index] = e - 1
                out[tuple(mm)] = c * e
        return Polynomial._raw(self.nvars, out)

    def divmod(self, divisor: Polynomial) -> tuple[Polynomial, Polynomial]:
        """Multivariate division by a single polynomial in graded-lex order.

        The remainder is zero exactly when ``divisor`` divides ``self``.
        """
        divisor = self._coerce(divisor)
        if divisor.is_zero():
            raise ZeroDivisionError("division by the zero polynomial")
        lm, lc = divisor.leading_term()
        q: dict[Monomial, Fraction] = {}
        r: dict[Monomial, Fraction] = {}
        p = dict(self._terms)
        while p:
            pm = max(p, key=_grlex_key)
            pc = p[pm]
            if all(a >= b for a, b in zip(pm, lm)):
                tm = tuple(a - b for a, b in zip(pm, lm))
                tc = pc / lc
                q[tm] = q.get(tm, 0) + tc
                for dm, dc in divisor._terms.items():
                    m = tuple(a + b for a, b in zip(tm, dm))
                    v = p.get(m, 0) - tc * dc
                    if v:
                        p[m] = v
                    else:
                        p.pop(m, None)
            else:
                r[pm] = pc
                del p[pm]
        return Polynomial(self.nvars, q), Polynomial._raw(self.nvars, r)

    def exact_div(self, divisor: Polynomial) -> Polynomial | None:
        q, r = self.divmod(divisor)
        return q if r.is_zero() else None

    def substitute_squares(self) -> Polynomial | None:
        """Return ``Q`` with ``self(x) = Q(x1^2, ..., xn^2)``, or ``None`` if some exponent is odd."""
        out = {}
        for m, c in self._terms.items():
            if any(e % 2 for e in m):
                return None
            out[tuple(e // 2 for e in m)] = c
        return Polynomial._raw(self.nvars, out)

    # evaluation
    def evaluate(self, x: Sequence):
        """Evaluate at one point; exact when every coordinate is rational."""
        if len(x) != self.nvars:
            raise ArityMismatch(f"point has {len(x)} coordinates, expected {self.nvars}")
        exact = all(isinstance(v, (int, Fraction, Rational)) for v in x)
        total = Fraction(0) if exact else 0.0
        for m, c in self._terms.items():
            t = c if exact else float(c)
            for v, e in zip(x, m):
                if e:
                    t = t * v**e
            total += t
        return total

    def evaluate_many(self, X: np.ndarray) -> np.ndarray:
        """Float evaluation at each row of ``X`` (shape ``(N, nvars)``)."""
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape[0])
        cache: dict[tuple[int, int], np.ndarray] = {}
        for m, c in self._terms.items():
            t = np.full(X.shape[0], float(c))
            for i, e in enumerate(m):
                if e:
                    key = (i, e)
                    if key not in cache:
                        cache[key] = X[:, i] ** e
                    t = t * cache[key]
            out += t
        return out

    # display
    def to_str(self, names: Sequence[str] | None = None) -> str:
        names = names or [f"x{i + 1}" for i in range(self.nvars)]
        if not self._terms:
            return "0"
        pieces = []
        for k, (m, c) in enumerate(self.sorted_terms()):
            factors = [n if e == 1 else f"{n}^{e}" for n, e in zip(names, m) if e]
            mag = abs(c)
            if factors and mag == 1:
                body = "*".join(factors)
            else:
                body = "*".join([str(mag)] + factors)
            if k == 0:
                pieces.append(("-" if c < 0 else "") + body)
            else:
                pieces.append((" - " if c < 0 else " + ") + body)
        return "".join(pieces)

    def __str__(self):
        return self.to_str()

    def __repr__(self):
        return f"Polynomial({self.nvars}, {self.to_str()!r})"


def gram_matrix(q: Polynomial) -> list[list[Fraction]] | None:
    """Symmetric matrix ``G`` with ``q(x) = x^T G x``, or ``None`` if ``q`` is not a quadratic form."""
    if q.is_zero() or q.degree() != 2 or not q.is_homogeneous():
        return None
    n = q.nvars
    G = [[Fraction(0)] * n for _ in range(n)]
    for m, c in q.terms.items():
        idx = [i for i, e in enumerate(m) for _ in range(e)]
        i, j = idx
        if i == j:
            G[i][i] += c
        else:
            G[i][j] += c / 2
            G[j][i] += c / 2
    return G


class NormExpr:
    """Finite sum ``sum_m w(x)^m p_m(x)`` with ``m`` possibly negative.

    ``w`` (``base``) is ``|x|^2`` by default, or a positive definite quadratic
    form ``x^T P x`` for ellipsoidal densities.
    """

    __slots__ = ("nvars", "parts", "base")

    def __init__(self, nvars: int, parts: Mapping[int, Polynomial] | None = None, base: Polynomial | None = None):
        self.nvars = nvars
        self.base = base if base is not None else Polynomial.norm_sq(nvars)
        clean: dict[int, Polynomial] = {}
        for m, p in (parts or {}).items():
            if p.nvars != nvars:
                raise ArityMismatch(f"part {m} has {p.nvars} variables, expected {nvars}")
            if not p.is_zero():
                clean[int(m)] = clean[int(m)] + p if int(m) in clean else p
                if clean[int(m)].is_zero():
                    del clean[int(m)]
        self.parts = MappingProxyType(clean)

    @classmethod
    def from_poly(cls, p: Polynomial, base: Polynomial | None = None, power: int = 0) -> NormExpr:
        return cls(p.nvars, {power: p}, base)

    def is_zero(self) -> bool:
        return not self.parts

    def _check(self, other: NormExpr):
        if other.nvars != self.nvars or other.base != self.base:
            raise ArityMismatch("NormExpr operands have different variables or weights")

    def __add__(self, other: NormExpr) -> NormExpr:
        self._check(other)
        parts = dict(self.parts)
        for m, p in other.parts.items():
            parts[m] = parts[m] + p if m in parts else p
        return NormExpr(self.nvars, parts, self.base)

    def __neg__(self) -> NormExpr:
        return NormExpr(self.nvars, {m: -p for m, p in self.parts.items()}, self.base)

    def __sub__(self, other: NormExpr) -> NormExpr:
        return self + (-other)

    def scale(self, c) -> NormExpr:
        return NormExpr(self.nvars, {m: p * c for m, p in self.parts.items()}, self.base)

    def times_poly(self, q: Polynomial) -> NormExpr:
        return NormExpr(self.nvars, {m: p * q for m, p in self.parts.items()}, self.base)

    def shift(self, k: int) -> NormExpr:
        """Multiply by ``w^k``."""
        return NormExpr(self.nvars, {m + k: p for m, p in self.parts.items()}, self.base)

    def __eq__(self, other):
        if not isinstance(other, NormExpr):
            return NotImplemented
        return self.nvars == other.nvars and self.base == other.base and dict(self.parts) == dict(other.parts)

    def __hash__(self):
        return hash((self.nvars, self.base, frozenset(self.parts.items())))

    def collapse(self) -> NormExpr:
        """Merge every part onto the lowest key (single-part form, same value)."""
        if len(self.parts) <= 1:
            return self
        m0 = min(self.parts)
        total = Polynomial.zero(self.nvars)
        for m, p in self.parts.items():
            total = total + p * self.base ** (m - m0)
        return NormExpr(self.nvars, {m0: total}, self.base)

    def normalize(self) -> NormExpr:
        """Collapse to one part and pull every factor of ``w`` out of it."""
        e = self.collapse()
        if e.is_zero():
            return e
        ((m, p),) = e.parts.items()
        while True:
            q = p.exact_div(self.base)
            if q is None:
                break
            p, m = q, m + 1
        return NormExpr(self.nvars, {m: p}, self.base)

    def sign_form(self) -> tuple[Polynomial, int]:
        """``(q, m)`` with ``self = w^m q`` and ``q`` free of ``w`` factors.

        Off the origin ``w > 0``, so ``q`` carries the sign of the expression.
        """
        e = self.normalize()
        if e.is_zero():
            return Polynomial.zero(self.nvars), 0
        ((m, p),) = e.parts.items()
        return p, m

    def evaluate(self, x: Sequence):
        if len(x) != self.nvars:
            raise ArityMismatch(f"point has {len(x)} coordinates, expected {self.nvars}")
        w = self.base.evaluate(x)
        if w == 0 and any(m < 0 for m in self.parts):
            raise EvalAtOriginWithNegativePower("negative norm power evaluated at the origin")
        total = 0
        for m, p in self.parts.items():
            total += w**m * p.evaluate(x)
        return total if self.parts else (Fraction(0) if all(isinstance(v, (int, Fraction)) for v in x) else 0.0)

    def evaluate_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        w = self.base.evaluate_many(X)
        out = np.zeros(X.shape[0])
        with np.errstate(divide="ignore", invalid="ignore"):
            for m, p in self.parts.items():
                out += w ** float(m) * p.evaluate_many(X)
        return out

    def to_str(self, names: Sequence[str] | None = None) -> str:
        if not self.parts:
            return "0"
        names = names or [f"x{i + 1}" for i in range(self.nvars)]
        wname = "|x|" if self.base == Polynomial.norm_sq(self.nvars) else "w"
        pieces = []
        for m in sorted(self.parts, reverse=True):
            p = self.parts[m].to_str(names)
            if m == 0:
                pieces.append(f"({p})")
            else:
                weight = f"{wname}^({2 * m})" if wname == "|x|" else f"w^({m})"
                pieces.append(f"{weight}*({p})")
        return " + ".join(pieces)

    def __str__(self):
        return self.to_str()

    def __repr__(self):
        return f"NormExpr({self.to_str()!r})"


def normexpr_clear_denominator(e: NormExpr) -> tuple[Polynomial, int]:
    """Return ``(q, M)`` with ``q = w^M * e`` a polynomial, ``M = max(0, -min key)``."""
    if e.is_zero():
        return Polynomial.zero(e.nvars), 0
    shift = max(0, -min(e.parts))
    q = Polynomial.zero(e.nvars)
    for m, p in e.parts.items():
        q = q + p * e.base ** (m + shift)
    return q, shift


def evaluate(obj: Polynomial | NormExpr, x: Sequence):
    return obj.evaluate(x)


def poly_arith(a: Polynomial, b: Polynomial, op: str) -> Polynomial:
    if a.nvars != b.nvars:
        raise ArityMismatch(f"{a.nvars} vs {b.nvars} variables")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown op {op!r}")


def differentiate(p: Polynomial, var_index: int) -> Polynomial:
    return p.diff(var_index)


# -- parser -------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(\S))")


def _tokenize(src: str):
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:  # trailing whitespace
            break
        if m.group(1) is not None:
            tokens.append(("int", m.group(1), m.start(1)))
        elif m.group(2) is not None:
            tokens.append(("ident", m.group(2), m.start(2)))
        elif m.group(3) is not None:
            ch = m.group(3)
            if ch not in "+-*/^()":
                raise ParseError(m.start(3), f"unexpected character {ch!r}")
            tokens.append((ch, ch, m.start(3)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, names: Sequence[str]):
        self.src = src
        self.names = {n: i for i, n in enumerate(names)}
        self.nvars = len(names)
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind=None):
        tok = self.tokens[self.i]
        if kind is not None and tok[0] != kind:
            raise ParseError(tok[2], f"expected {kind!r}, found {tok[1] or 'end of input'!r}")
        self.i += 1
        return tok

    def parse(self) -> Polynomial:
        p = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(tok[2], f"unexpected {tok[1]!r}")
        return p

    def expr(self) -> Polynomial:
        neg = False
        if self.peek()[0] == "-":
            self.take()
            neg = True
        acc = self.term()
        if neg:
            acc = -acc
        while self.peek()[0] in "+-":
            op = self.take()[0]
            t = self.term()
            acc = acc + t if op == "+" else acc - t
        return acc

    def term(self) -> Polynomial:
        acc = self.factor()
        while self.peek()[0] == "*":
            self.take()
            acc = acc * self.factor()
        tok = self.peek()
        if tok[0] in ("int", "ident", "("):
            raise ParseError(tok[2], "implicit multiplication is not allowed; use '*'")
        return acc

    def factor(self) -> Polynomial:
        base = self.base()
        if self.peek()[0] == "^":
            self.take()
            tok = self.peek()
            if tok[0] != "int":
                raise NonIntegerExponent(tok[2], "exponent must be a non-negative integer literal")
            self.take()
            nxt = self.peek()
            if nxt[0] == "/":
                raise NonIntegerExponent(nxt[2], "exponent must be a non-negative integer literal")
            base = base ** int(tok[1])
        return base

    def base(self) -> Polynomial:
        tok = self.peek()
        if tok[0] == "int":
            self.take()
            value = Fraction(int(tok[1]))
            if self.peek()[0] == "/":
                self.take()
                den = self.peek()
                if den[0] != "int":
                    raise ParseError(den[2], "expected integer denominator")
                self.take()
                if int(den[1]) == 0:
                    raise ParseError(den[2], "zero denominator")
                value /= int(den[1])
            return Polynomial.const(value, self.nvars)
        if tok[0] == "ident":
            self.take()
            if tok[1] not in self.names:
                raise UnknownVariable(tok[2], tok[1])
            return Polynomial.var(self.names[tok[1]], self.nvars)
        if tok[0] == "(":
            self.take()
            inner = self.expr()
            self.take(")")
            return inner
        raise ParseError(tok[2], f"unexpected {tok[1] or 'end of input'!r}")


def parse_polynomial(src: str, names: Sequence[str]) -> Polynomial:
    """Parse ``src`` exactly over the ordered variable ``names``.

    >>> parse_polynomial("x2 - 2*x1*x3^2", ["x1", "x2", "x3"]).to_str()
    '-2*x1*x3^2 + x2'
    """
    if not names:
        raise ValueError("at least one variable name is required")
    return _Parser(src, list(names)).parse()
