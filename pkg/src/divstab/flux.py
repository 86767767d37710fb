"""Monte-Carlo volume integrals over sublevel sets and flux through their boundary."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .expr import NormExpr, Polynomial
from .field import SymMatrix, VectorField, divergence
from .sampling import ball_volume, chunk_rng, map_chunks, sphere_area, uniform_ball, uniform_shell, unit_directions

Z99 = 2.58
ORIGIN_EXCLUSION = 1e-6

Integrand = Callable[[np.ndarray], np.ndarray]


class NonIntegrableNearOrigin(Exception):
    pass


@dataclass(frozen=True)
class RegionSpec:
    """Sublevel set ``{S(x) <= C}`` with ``S = |x|^2`` or ``S = x^T P x``."""

    kind: str
    C: float
    P: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("norm_sq", "quadform"):
            raise ValueError(f"unknown level function {self.kind!r}")
        if not self.C > 0:
            raise ValueError("level C must be positive")
        if self.kind == "quadform":
            P = np.asarray(self.P, dtype=float)
            if not np.allclose(P, P.T) or np.any(np.linalg.eigvalsh(P) <= 0):
                raise ValueError("P must be symmetric positive definite")
            object.__setattr__(self, "P", P)

    def dim(self, default: int) -> int:
        return default if self.P is None else self.P.shape[0]

    def transform(self, n: int, level: float | None = None) -> np.ndarray:
        """``M`` such that ``x = M y`` maps the unit ball onto ``{S <= level}``."""
        level = self.C if level is None else level
        if self.kind == "norm_sq":
            return np.sqrt(level) * np.eye(n)
        L = np.linalg.cholesky(self.P)
        return np.sqrt(level) * np.linalg.inv(L).T

    def volume(self, n: int) -> float:
        return ball_volume(n) * abs(np.linalg.det(self.transform(n)))

    def grad_S(self, X: np.ndarray) -> np.ndarray:
        return 2 * X if self.kind == "norm_sq" else 2 * X @ self.P


@dataclass(frozen=True)
class IntegralEstimate:
    mean: float
    std_error: float
    n_samples: int
    sign_verdict: str
    notes: tuple[str, ...] = field(default=())


def _verdict(mean: float, se: float) -> str:
    if mean + Z99 * se < 0:
        return "Negative"
    if mean - Z99 * se > 0:
        return "Positive"
    return "Inconclusive"


def _as_integrand(g) -> Integrand:
    if isinstance(g, (NormExpr, Polynomial)):
        return g.evaluate_many
    return g


def _integrability(g, n: int) -> list[str]:
    if not isinstance(g, NormExpr) or g.is_zero() or min(g.parts) >= 0:
        return []
    q, m = g.sign_form()
    if q.is_zero() or m >= 0:
        return []
    if 2 * m + q.lowdeg() <= -n:
        raise NonIntegrableNearOrigin(f"integrand behaves like |x|^{2 * m + q.lowdeg()} at the origin in dimension {n}")
    return [f"integrand excluded on |x| < {ORIGIN_EXCLUSION:g}"]


def _reduce(parts: list[tuple[float, float, int]], scale: float) -> tuple[float, float, int]:
    s = sum(p[0] for p in parts)
    ss = sum(p[1] for p in parts)
    N = sum(p[2] for p in parts)
    mean = s / N
    var = max(ss / N - mean * mean, 0.0) * N / max(N - 1, 1)
    return scale * mean, scale * np.sqrt(var / N), N


def _estimate(values_for_chunk, n_samples: int, scale: float, workers: int, notes) -> IntegralEstimate:
    def work(k, size):
        v = values_for_chunk(k, size)
        return float(np.sum(v)), float(np.sum(v * v)), size

    mean, se, N = _reduce(map_chunks(work, n_samples, workers), scale)
    return IntegralEstimate(mean, se, N, _verdict(mean, se), tuple(notes))


def _masked(fn: Integrand, X: np.ndarray, exclude: bool) -> np.ndarray:
    v = fn(X)
    if exclude:
        v = np.where(np.linalg.norm(X, axis=1) < ORIGIN_EXCLUSION, 0.0, v)
    return np.nan_to_num(v, nan=0.0, posinf=0.0, neginf=0.0)


def volume_integral(g, region: RegionSpec, n: int = 100_000, seed: int = 0, nvars: int | None = None, workers: int = 1) -> IntegralEstimate:
    """Estimate ``int_{S <= C} g dV`` by uniform sampling of the sublevel set."""
    d = region.dim(nvars or g.nvars)
    notes = _integrability(g, d)
    fn = _as_integrand(g)
    M = region.transform(d)

    def values(k, size):
        X = uniform_ball(chunk_rng(seed, k), size, d) @ M.T
        return _masked(fn, X, bool(notes))

    return _estimate(values, n, region.volume(d), workers, notes)


def shell_integral(g, region: RegionSpec, outer_level: float | None = None, n: int = 100_000, seed: int = 0, nvars: int | None = None, workers: int = 1) -> IntegralEstimate:
    """Estimate the integral over the shell ``{1/C <= S <= outer_level}``.

    Stands in for the unbounded inverse-level region; ``outer_level``
    defaults to ``10/C`` and the truncation is recorded in the notes.
    """
    d = region.dim(nvars or g.nvars)
    inner = 1.0 / region.C
    outer = 10.0 * inner if outer_level is None else outer_level
    if outer <= inner:
        raise ValueError("outer level must exceed the inner level")
    fn = _as_integrand(g)
    M = region.transform(d, 1.0)
    scale = ball_volume(d) * abs(np.linalg.det(M)) * (outer ** (d / 2) - inner ** (d / 2))
    notes = [f"region truncated to {inner:g} <= S <= {outer:g}"]

    def values(k, size):
        Y = uniform_shell(chunk_rng(seed, k), size, d, np.sqrt(inner), np.sqrt(outer))
        return _masked(fn, Y @ M.T, False)

    return _estimate(values, n, scale, workers, notes)


def surface_flux(f: VectorField, phi, region: RegionSpec, n: int = 100_000, seed: int = 0, workers: int = 1) -> IntegralEstimate:
    """Estimate ``oint_{S = C} phi(x) grad S(x) . f(x) dGamma``.

    The sphere is sampled uniformly and pushed through ``x = M u``; the area
    element picks up ``|det M| |M^-T u|``.
    """
    d = f.n
    M = region.transform(d)
    detM = abs(np.linalg.det(M))
    MinvT = np.linalg.inv(M).T
    phi_fn = _as_integrand(phi) if phi is not None else (lambda X: np.ones(len(X)))

    def values(k, size):
        U = unit_directions(chunk_rng(seed, k), size, d)
        X = U @ M.T
        jac = detM * np.linalg.norm(U @ MinvT.T, axis=1)
        flow = np.sum(region.grad_S(X) * f.evaluate_many(X), axis=1)
        return phi_fn(X) * flow * jac

    return _estimate(values, n, sphere_area(d), workers, [])


def phi_for_density(rho: NormExpr, region: RegionSpec) -> Integrand:
    """``phi = rho / |grad S|`` so that ``phi |grad S| = rho``."""
    return lambda X: rho.evaluate_many(X) / np.linalg.norm(region.grad_S(X), axis=1)


def grad_norm_integrand(f: VectorField, region: RegionSpec) -> Integrand:
    """``div(|grad S| f)`` for the quadratic level function of ``region``."""
    div_f = divergence(f)
    P = np.eye(f.n) if region.kind == "norm_sq" else region.P

    def fn(X):
        PX = X @ P.T
        nrm = np.linalg.norm(PX, axis=1)
        F = f.evaluate_many(X)
        with np.errstate(divide="ignore", invalid="ignore"):
            grad_part = 2 * np.sum((PX @ P.T) * F, axis=1) / nrm
        return grad_part + 2 * nrm * div_f.evaluate_many(X)

    return fn


def combined_std_error(a: IntegralEstimate, b: IntegralEstimate) -> float:
    return float(np.hypot(a.std_error, b.std_error))


def quadform_region(P: SymMatrix | np.ndarray, C: float) -> RegionSpec:
    arr = P.to_array() if isinstance(P, SymMatrix) else np.asarray(P, dtype=float)
    return RegionSpec("quadform", C, arr)
