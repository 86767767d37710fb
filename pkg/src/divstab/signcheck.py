"""Three-valued sign decisions for polynomials on a region minus the origin.

A verdict is ``proven`` only through one of the exact certificates below;
sampling can refute (with an exactly re-checked witness) but never prove.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .expr import Polynomial, gram_matrix
from .field import default_names, ldl_inertia
from .sampling import CHUNK, chunk_rng, map_chunks, uniform_ball, unit_directions

SIGNS = ("<=", "<", ">=", ">")
TOL = 1e-12
DEFAULT_SAMPLES = 10_000
PROBE_SCALES = tuple(10.0**-k for k in range(0, 7))


class EmptyU(Exception):
    """No point with ``rho > 0`` found in the instability ball."""


@dataclass(frozen=True)
class SignVerdict:
    status: str  # "proven" | "refuted" | "undetermined"
    method: str | None = None
    witness: tuple[float, ...] | None = None
    value: float | None = None
    samples: int = 0
    zero_set_note: str | None = None

    @property
    def proven(self) -> bool:
        return self.status == "proven"

    @property
    def refuted(self) -> bool:
        return self.status == "refuted"

    def summary(self) -> str:
        if self.status == "proven":
            s = f"Proven({self.method})"
            if self.zero_set_note:
                s += f" zero set {self.zero_set_note}"
            return s
        if self.status == "refuted":
            w = ", ".join(f"{v:.6g}" for v in self.witness)
            return f"Refuted at ({w}) value {self.value:.6g}"
        return f"Undetermined after {self.samples} samples"


def _orientation(required: str) -> int:
    """+1 when positive values violate (``<=``/``<``), -1 otherwise."""
    if required not in SIGNS:
        raise ValueError(f"required sign must be one of {SIGNS}")
    return 1 if required in ("<=", "<") else -1


def _strict(required: str) -> bool:
    return required in ("<", ">")


def _hitting_sets(supports: list[frozenset[int]], n: int) -> list[tuple[int, ...]]:
    minimal: list[tuple[int, ...]] = []
    for size in range(1, n + 1):
        for combo in itertools.combinations(range(n), size):
            s = set(combo)
            if any(set(h) <= s for h in minimal):
                continue
            if all(sup & s for sup in supports):
                minimal.append(combo)
    return minimal


def monomial_zero_set(q: Polynomial, names: Sequence[str]) -> str | None:
    """Common zero locus of the monomials of ``q``; ``None`` if empty."""
    supports = [frozenset(i for i, e in enumerate(m) if e) for m in q.terms]
    if any(not s for s in supports):
        return None
    sets = _hitting_sets(supports, q.nvars)
    if sets == [tuple(range(q.nvars))]:
        return "{0}"
    parts = ["{" + ", ".join(f"{names[i]}=0" for i in h) + "}" for h in sets]
    return " u ".join(parts)


def _even_monomial(q: Polynomial, s: int, names) -> SignVerdict | None:
    if any(e % 2 for m in q.terms for e in m):
        return None
    if any(s * c > 0 for c in q.terms.values()):
        return None
    return SignVerdict("proven", "EvenMonomial", zero_set_note=monomial_zero_set(q, names))


def _quad_form(q: Polynomial, s: int, strict: bool) -> SignVerdict | None:
    G = gram_matrix(q)
    if G is None:
        return None
    # s*q <= 0 everywhere iff -s*G is positive semidefinite
    pos, neg, zero = ldl_inertia([[-s * v for v in row] for row in G])
    if neg:
        return None
    note = "{0}" if zero == 0 else f"kernel of the quadratic form (dimension {zero})"
    return SignVerdict("proven", "QuadForm", zero_set_note=note)


def _sos_diagonal(q: Polynomial, s: int, strict: bool) -> SignVerdict | None:
    """Certificate in squared coordinates ``y = x^2`` on the orthant ``y >= 0``.

    Terms of the favourable sign are dropped (each is a square times a
    favourable coefficient); what remains must be a semidefinite quadratic
    form in ``y``, i.e. a sum of squares of linear forms in ``x_i^2``.
    """
    Q = q.substitute_squares()
    if Q is None:
        return None
    n = q.nvars
    R = [[Fraction(0)] * n for _ in range(n)]
    for m, c in Q.terms.items():
        deg = sum(m)
        favourable = s * c < 0
        if deg == 2:
            idx = [i for i, e in enumerate(m) for _ in range(e)]
            i, j = idx
            if i == j:
                R[i][i] += c
            elif not favourable:
                R[i][j] += c / 2
                R[j][i] += c / 2
        elif not favourable:
            return None
    pos, neg, zero = ldl_inertia([[-s * v for v in row] for row in R])
    if neg:
        return None
    if zero:
        if strict:
            return None
        return SignVerdict("proven", "SOSDiagonal", zero_set_note="not isolated")
    return SignVerdict("proven", "SOSDiagonal", zero_set_note="{0}")


def prove_sign(q: Polynomial, required: str, names: Sequence[str] | None = None) -> SignVerdict | None:
    """Try the exact certificates in order; ``None`` when none applies."""
    s = _orientation(required)
    strict = _strict(required)
    names = names or default_names(q.nvars)
    if q.is_zero():
        return None if strict else SignVerdict("proven", "EvenMonomial", zero_set_note="identically zero")
    for attempt in (
        lambda: _even_monomial(q, s, names),
        lambda: _quad_form(q, s, strict),
        lambda: _sos_diagonal(q, s, strict),
    ):
        v = attempt()
        if v is not None:
            return v
    return None


def _probes(n: int, radius: float) -> np.ndarray:
    base = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        base.append(e)
        base.append(-e)
    ones = np.ones(n) / np.sqrt(n)
    base += [ones, -ones]
    pts = [radius * scale * b for scale in PROBE_SCALES for b in base]
    return np.array(pts)


def _exact_violation(q: Polynomial, x: np.ndarray, s: int) -> Fraction | None:
    v = q.evaluate([Fraction(float(c)) for c in x])
    return v if s * v > 0 else None


class _Search:
    """First-violation search over probes followed by deterministic random chunks."""

    def __init__(self, q: Polynomial, s: int, seed: int, workers: int):
        self.q, self.s, self.seed, self.workers = q, s, seed, workers

    def scan(self, X: np.ndarray):
        vals = self.q.evaluate_many(X)
        for idx in np.flatnonzero(self.s * vals > TOL):
            exact = _exact_violation(self.q, X[idx], self.s)
            if exact is not None:
                return tuple(float(c) for c in X[idx]), float(exact)
        return None

    def run(self, probes: np.ndarray, n_samples: int, draw):
        hit = self.scan(probes) if len(probes) else None
        if hit:
            return hit
        results = map_chunks(lambda k, size: self.scan(draw(chunk_rng(self.seed, k), size)), n_samples, self.workers)
        return next((r for r in results if r), None)


def check_sign(
    q: Polynomial,
    required: str,
    radius: float | None = 1.0,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    names: Sequence[str] | None = None,
    workers: int = 1,
) -> SignVerdict:
    """Decide whether ``q`` has sign ``required`` on ``{|x| <= radius} \\ {0}``.

    ``radius=None`` means all of R^n. Exact certificates hold globally and
    therefore on any ball.
    """
    s = _orientation(required)
    exact = prove_sign(q, required, names)
    if exact is not None:
        return exact
    n = q.nvars
    if q.is_zero():
        e1 = tuple([1.0] + [0.0] * (n - 1))
        return SignVerdict("refuted", witness=e1, value=0.0, samples=0)
    homogeneous = q.is_homogeneous() and q.degree() > 0
    r = 1.0 if radius is None else float(radius)

    if homogeneous:
        def draw(rng, size):
            return r * unit_directions(rng, size, n)
    elif radius is None:
        def draw(rng, size):
            u = unit_directions(rng, size, n)
            return u * (10.0 ** rng.uniform(-6, 3, size))[:, None]
    else:
        def draw(rng, size):
            return uniform_ball(rng, size, n, r)

    probes = _probes(n, r)
    if radius is None:
        probes = np.vstack([probes, 10.0 * probes[: 2 * n + 2], 100.0 * probes[: 2 * n + 2]])
    hit = _Search(q, s, seed, workers).run(probes, samples, draw)
    if hit:
        return SignVerdict("refuted", witness=hit[0], value=hit[1], samples=samples)
    return SignVerdict("undetermined", samples=samples)


def check_sign_on_U(
    q: Polynomial,
    rho: Polynomial,
    required: str,
    r: float = 1.0,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    names: Sequence[str] | None = None,
    workers: int = 1,
) -> SignVerdict:
    """Sign of ``q`` on ``U = {|x| <= r, rho(x) > 0}``."""
    s = _orientation(required)
    exact = prove_sign(q, required, names)
    if exact is not None and (not _strict(required) or exact.zero_set_note in (None, "{0}")):
        return exact
    n = q.nvars
    accepted = 0

    def keep(X):
        return X[rho.evaluate_many(X) > 0]

    search = _Search(q, s, seed, workers)
    probes = keep(_probes(n, r))
    accepted += len(probes)
    hit = search.scan(probes) if len(probes) else None
    k = 0
    max_draws = 50 * max(samples, 1)
    drawn = 0
    while hit is None and accepted < samples + len(probes) and drawn < max_draws:
        X = keep(uniform_ball(chunk_rng(seed, k), CHUNK, n, r))
        k += 1
        drawn += CHUNK
        X = X[: samples + len(probes) - accepted]
        accepted += len(X)
        if len(X):
            hit = search.scan(X)
    if accepted == 0:
        raise EmptyU(f"no point with rho > 0 found in the ball of radius {r}")
    if hit:
        return SignVerdict("refuted", witness=hit[0], value=hit[1], samples=accepted)
    return SignVerdict("undetermined", samples=accepted)
