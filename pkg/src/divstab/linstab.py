"""Trace-shifted Lyapunov inequalities for linear systems ``x' = A x``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEF_TOL = 1e-10
RESIDUAL_TOL = 1e-9


class LinstabError(Exception):
    pass


class SingularLyapunovOperator(LinstabError):
    pass


class DimensionMismatch(LinstabError):
    pass


@dataclass(frozen=True)
class LinearAnalysis:
    A: np.ndarray
    alpha: float
    beta: float = 1.0
    P_source: str = "SolvedFromShifted"  # or "Supplied", "SolvedFromLyapunov"


@dataclass
class LinearVerdict:
    status: str  # "Holds" | "Fails" | "Undetermined" | "NotApplicable"
    P: np.ndarray | None = None
    P_source: str | None = None
    form_eigenvalues: list[np.ndarray] = field(default_factory=list)
    hurwitz: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.status == "Holds"


def _square(M, name="matrix") -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {M.shape}")
    return M


def lyapunov_solve(M, Q) -> np.ndarray:
    """Symmetric ``P`` with ``M^T P + P M = -Q``.

    Dense solve over the ``n(n+1)/2`` upper-triangular unknowns of ``P``.
    """
    M = _square(M, "M")
    Q = _square(Q, "Q")
    n = M.shape[0]
    if Q.shape != (n, n):
        raise DimensionMismatch(f"Q has shape {Q.shape}, expected {(n, n)}")
    idx = [(i, j) for i in range(n) for j in range(i, n)]
    pos = {ij: k for k, ij in enumerate(idx)}

    def var(i, j):
        return pos[(i, j) if i <= j else (j, i)]

    K = np.zeros((len(idx), len(idx)))
    rhs = np.empty(len(idx))
    for r, (i, j) in enumerate(idx):
        # (M^T P + P M)_{ij} = sum_k M_{ki} P_{kj} + P_{ik} M_{kj}
        for k in range(n):
            K[r, var(k, j)] += M[k, i]
            K[r, var(i, k)] += M[k, j]
        rhs[r] = -Q[i, j]
    s = np.linalg.svd(K, compute_uv=False)
    if s[-1] <= 1e-12 * max(s[0], 1.0):
        raise SingularLyapunovOperator("M has eigenvalues summing to zero; the Lyapunov operator is singular")
    sol = np.linalg.solve(K, rhs)
    P = np.empty((n, n))
    for (i, j), v in zip(idx, sol):
        P[i, j] = P[j, i] = v
    resid = np.linalg.norm(M.T @ P + P @ M + Q)
    if resid > RESIDUAL_TOL * max(np.linalg.norm(Q), 1e-300):
        raise SingularLyapunovOperator(f"ill-conditioned Lyapunov operator (residual {resid:.3e})")
    return P


def is_negative_definite(F: np.ndarray, tol: float = DEF_TOL) -> tuple[bool, np.ndarray]:
    F = 0.5 * (F + F.T)
    eig = np.linalg.eigvalsh(F)
    scale = np.linalg.norm(F)
    return bool(np.all(eig < -tol * scale)) and scale > 0, eig


def is_positive_definite(P: np.ndarray, tol: float = DEF_TOL) -> bool:
    return is_negative_definite(-np.asarray(P, dtype=float), tol)[0]


def is_hurwitz(A: np.ndarray) -> bool:
    return bool(np.all(np.linalg.eigvals(A).real < 0))


def shifted_form(A: np.ndarray, P: np.ndarray, coef: float) -> np.ndarray:
    """``A^T P + P A - coef * trace(A) * P``."""
    return A.T @ P + P @ A - coef * np.trace(A) * P


def case1_coefficient(alpha: float, beta: float) -> float:
    return (1.0 / alpha) * (beta - 1.0) / (beta + 1.0)


def check_case1(A, alpha: float, beta: float = 1.0, P=None) -> LinearVerdict:
    """``A^T P + P A - (1/alpha)(beta-1)/(beta+1) tr(A) P < 0`` with ``P > 0``."""
    A = _square(A, "A")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if beta < 1:
        raise ValueError("beta must be >= 1")
    hurwitz = is_hurwitz(A)
    if beta > 1 and np.trace(A) > 0:
        return LinearVerdict("NotApplicable", hurwitz=hurwitz, notes=["beta > 1 requires trace(A) <= 0"])
    c = case1_coefficient(alpha, beta)
    n = A.shape[0]
    if P is None:
        M = A - 0.5 * c * np.trace(A) * np.eye(n)
        try:
            P = lyapunov_solve(M, np.eye(n))
        except SingularLyapunovOperator as exc:
            return LinearVerdict("Undetermined", hurwitz=hurwitz, notes=[str(exc)])
        source = "SolvedFromShifted"
    else:
        P = _square(P, "P")
        source = "Supplied"
    ok, eig = is_negative_definite(shifted_form(A, P, c))
    pd = is_positive_definite(P)
    notes = [] if pd else ["P is not positive definite"]
    v = LinearVerdict("Holds" if ok and pd else "Fails", P, source, [eig], hurwitz, notes)
    _guard(v)
    return v


def check_case2(A, alpha: float, P=None) -> LinearVerdict:
    """Both ``A^T P + P A -/+ (1/alpha) tr(A) P < 0`` for one common ``P > 0``."""
    A = _square(A, "A")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    hurwitz = is_hurwitz(A)
    c = 1.0 / alpha
    n = A.shape[0]

    def test(P):
        ok1, e1 = is_negative_definite(shifted_form(A, P, c))
        ok2, e2 = is_negative_definite(shifted_form(A, P, -c))
        return ok1 and ok2 and is_positive_definite(P), [e1, e2]

    if P is not None:
        P = _square(P, "P")
        ok, eigs = test(P)
        v = LinearVerdict("Holds" if ok else "Fails", P, "Supplied", eigs, hurwitz)
        _guard(v)
        return v
    candidates = [("SolvedFromLyapunov", A)]
    tr = np.trace(A)
    for sgn in (1.0, -1.0):
        candidates.append(("SolvedFromShifted", A - sgn * 0.5 * c * tr * np.eye(n)))
    last_eigs: list[np.ndarray] = []
    notes = []
    for source, M in candidates:
        try:
            Pc = lyapunov_solve(M, np.eye(n))
        except SingularLyapunovOperator as exc:
            notes.append(f"{source}: {exc}")
            continue
        ok, eigs = test(Pc)
        last_eigs = eigs
        if ok:
            v = LinearVerdict("Holds", Pc, source, eigs, hurwitz, notes)
            _guard(v)
            return v
    notes.append("no candidate P satisfied both inequalities; feasibility not decided")
    return LinearVerdict("Undetermined", None, None, last_eigs, hurwitz, notes)


def _guard(v: LinearVerdict):
    if v.holds and not v.hurwitz:
        raise AssertionError("matrix inequality certified for a non-Hurwitz A")
