"""Verification and template search for polynomial feedback ``u(x)`` on ``x' = xi + g u``."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .conditions import STABILITY, ConditionReport, ConditionSpec, analyze_stability
from .expr import ArityMismatch, Polynomial
from .field import DensitySpec, NormPower, VectorField
from .sampling import chunk_rng, uniform_ball
from .sim import SPEED, SimError, simulate

MAX_COMBINATIONS = 10_000


class TemplateTooLarge(Exception):
    pass


class NoneFound(Exception):
    pass


@dataclass(frozen=True)
class ControlSystem:
    xi: VectorField
    g: tuple[tuple[Polynomial, ...], ...]  # n rows, m columns
    u: tuple[Polynomial, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(tuple(row) for row in self.g))
        if len(self.g) != self.xi.n:
            raise ArityMismatch(f"g has {len(self.g)} rows, expected {self.xi.n}")
        widths = {len(row) for row in self.g}
        if len(widths) != 1:
            raise ArityMismatch("rows of g have different lengths")
        if self.u is not None:
            object.__setattr__(self, "u", tuple(self.u))
            if len(self.u) != self.m:
                raise ArityMismatch(f"u has {len(self.u)} channels, g has {self.m} columns")

    @property
    def m(self) -> int:
        return len(self.g[0])

    def with_u(self, u: Sequence[Polynomial]) -> ControlSystem:
        return ControlSystem(self.xi, self.g, tuple(u))

    def closed_loop(self, u: Sequence[Polynomial] | None = None) -> VectorField:
        u = self.u if u is None else tuple(u)
        if u is None:
            raise ValueError("no control law given")
        comps = []
        for xi_i, row in zip(self.xi.components, self.g):
            c = xi_i
            for g_ij, u_j in zip(row, u):
                c = c + g_ij * u_j
            comps.append(c)
        return VectorField(self.xi.vars, tuple(comps))


def verify_control(sys: ControlSystem, rho: DensitySpec, spec: ConditionSpec, **kw) -> ConditionReport:
    """Stability test of the closed loop; identical to ``analyze_stability`` on ``xi + g u``."""
    return analyze_stability(sys.closed_loop(), rho, spec, **kw)


@dataclass(frozen=True)
class SynthesisTemplate:
    """``u_j = sum_k c_jk * monomials[j][k]`` with every ``c_jk`` drawn from ``grid``."""

    monomials: tuple[tuple[Polynomial, ...], ...]
    grid: tuple[Fraction, ...]
    beta: Fraction = Fraction(1)
    alpha_range: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8)

    def __post_init__(self):
        object.__setattr__(self, "monomials", tuple(tuple(ch) for ch in self.monomials))
        object.__setattr__(self, "grid", tuple(Fraction(c) for c in self.grid))
        object.__setattr__(self, "beta", Fraction(self.beta))
        object.__setattr__(self, "alpha_range", tuple(self.alpha_range))
        if not self.grid:
            raise ValueError("coefficient grid is empty")
        if self.beta < 1:
            raise ValueError("beta must be >= 1")
        if self.size > MAX_COMBINATIONS:
            raise TemplateTooLarge(f"{self.size} combinations exceed the limit of {MAX_COMBINATIONS}")

    @property
    def n_coefficients(self) -> int:
        return sum(len(ch) for ch in self.monomials)

    @property
    def size(self) -> int:
        return len(self.grid) ** self.n_coefficients

    def law(self, coefs: Sequence[Fraction]) -> tuple[Polynomial, ...]:
        it = iter(coefs)
        out = []
        for ch in self.monomials:
            nvars = ch[0].nvars if ch else 1
            acc = Polynomial.zero(nvars)
            for mono in ch:
                acc = acc + mono * next(it)
            out.append(acc)
        return tuple(out)

    def combinations(self):
        """Coefficient tuples in lexicographic order of the grid."""
        return itertools.product(self.grid, repeat=self.n_coefficients)


@dataclass
class SynthesisResult:
    u: tuple[Polynomial, ...]
    coefficients: tuple[Fraction, ...]
    alpha: int
    report: ConditionReport
    index: int
    certified: int
    rejected_by_simulation: list[str] = field(default_factory=list)


def converges_in_simulation(f: VectorField, starts: int = 20, seed: int = 0, radius: float = 1.0) -> bool:
    """Every random start in the ball reaches the ``1e-6`` ball.

    Integrates the orbit-preserving time change ``x' = f |x| / |f|``: fields
    whose orbits are rays into the origin then decay like ``e^-s`` even when
    ``f`` itself is purely cubic. Near a continuum of equilibria the rescaled
    field chatters; the step budget turns that into a rejection.
    """
    X = uniform_ball(chunk_rng(seed, 0), starts, f.n, radius)
    for x0 in X:
        try:
            rec = simulate(f, x0, T=100.0, tol=1e-8, rescale=SPEED, max_steps=20_000)
        except SimError:
            return False
        if rec.classification.kind != "ConvergedToOrigin":
            return False
    return True


def synthesize(
    sys: ControlSystem,
    template: SynthesisTemplate,
    spec: ConditionSpec | None = None,
    rho: DensitySpec | None = None,
    simulation_gate: bool = True,
    gate_starts: int = 20,
    seed: int = 0,
    **kw,
) -> SynthesisResult:
    """Exhaustive search over the template.

    Certified candidates are ranked by number of nonzero coefficients, then
    coefficient absolute sum, then enumeration index. With the simulation
    gate on, the first ranked candidate whose closed loop also converges in
    simulation is returned; this discards laws that are certified only in the
    non-asymptotic sense (e.g. a continuum of equilibria on the zero set).
    """
    spec = spec or ConditionSpec(STABILITY, 3, beta=template.beta)
    densities = [rho] if rho is not None else [NormPower(a) for a in template.alpha_range]
    certified = []
    for index, coefs in enumerate(template.combinations()):
        u = template.law(coefs)
        for dens in densities:
            try:
                rep = verify_control(sys.with_u(u), dens, spec, seed=seed, **kw)
            except Exception:  # noqa: BLE001 - a candidate that cannot be analysed is skipped
                break
            if rep.overall == "Holds":
                key = (sum(1 for c in coefs if c), sum(abs(c) for c in coefs), index)
                certified.append((key, coefs, u, getattr(dens, "alpha", 0), rep))
                break
    certified.sort(key=lambda c: c[0])
    rejected = []
    for key, coefs, u, alpha, rep in certified:
        if simulation_gate and not converges_in_simulation(sys.closed_loop(u), gate_starts, seed):
            rejected.append(", ".join(p.to_str(sys.xi.vars) for p in u))
            continue
        return SynthesisResult(u, tuple(coefs), alpha, rep, key[2], len(certified), rejected)
    raise NoneFound(f"no certified law among {template.size} candidates ({len(certified)} certified, {len(rejected)} rejected by simulation)")
