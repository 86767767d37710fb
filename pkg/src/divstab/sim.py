"""Adaptive Dormand-Prince 5(4) integration and trajectory classification."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .field import VectorField

C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
E = B5 - B4
# continuous extension: y(t0 + th h) = y0 + h K^T (P [th, th^2, th^3, th^4])
P_DENSE = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

DEFAULT_T = 100.0
DEFAULT_TOL = 1e-9
EPS_CONV = 1e-6
R_ESCAPE = 1e3
RETURN_TOL = 1e-4
N_SAMPLES = 1001
MAX_STEPS = 2_000_000


class SimError(Exception):
    pass


class StepUnderflow(SimError):
    pass


class StepBudgetExhausted(SimError):
    pass


@dataclass(frozen=True)
class Classification:
    kind: str  # ConvergedToOrigin | Escaped | Periodic | Undecided
    value: float | None = None  # t_hit, t_exit or period estimate

    def __str__(self):
        if self.kind == "ConvergedToOrigin":
            return f"ConvergedToOrigin(t_hit={self.value:.6g})"
        if self.kind == "Escaped":
            return f"Escaped(t_exit={self.value:.6g})"
        if self.kind == "Periodic":
            return f"Periodic(period={self.value:.6g})"
        return "Undecided"


@dataclass
class TrajectoryRecord:
    t: np.ndarray
    x: np.ndarray
    params: dict
    classification: Classification | None = None
    steps: int = 0
    escaped_at: float | None = None
    _dense: tuple = field(default=(), repr=False)

    def at(self, tq: float) -> np.ndarray:
        """Evaluate the continuous extension at ``tq``."""
        t0s, hs, y0s, Qs = self._dense
        i = int(np.clip(np.searchsorted(t0s, tq, side="right") - 1, 0, len(t0s) - 1))
        th = (tq - t0s[i]) / hs[i]
        return y0s[i] + hs[i] * (Qs[i] @ np.array([th, th * th, th**3, th**4]))


SPEED = "speed"


def _rhs(f: VectorField, rescale):
    fn = f.compile()
    if not rescale:
        return lambda y: np.array(fn(y))
    if rescale == SPEED:

        def unit_speed(y):
            v = np.array(fn(y))
            nv = np.linalg.norm(v)
            return v * (np.linalg.norm(y) / nv) if nv > 0 else v

        return unit_speed

    def g(y):
        r2 = float(y @ y)
        if r2 == 0.0:
            return np.zeros_like(y)
        return np.array(fn(y)) / r2 ** (rescale / 2)

    return g


def rescale_exponent(f: VectorField) -> int:
    """``k = lowdeg(f) - 1`` so that ``f / |x|^k`` has a nonzero linear part scale."""
    d = f.lowdeg()
    return max((d or 1) - 1, 0)


def integrate(
    f: VectorField,
    x0: Sequence[float],
    T: float = DEFAULT_T,
    tol: float = DEFAULT_TOL,
    rescale: int | str = 0,
    n_samples: int = N_SAMPLES,
    R_escape: float = R_ESCAPE,
    max_steps: int = MAX_STEPS,
) -> TrajectoryRecord:
    """Integrate ``x' = f(x) / |x|^rescale`` on ``[0, T]``.

    ``rescale > 0`` is an orbital time change: orbits are unchanged, only
    their parametrisation. ``rescale="speed"`` uses ``x' = f |x| / |f|``,
    which moves at speed ``|x|`` along the same orbits (equilibria stay
    fixed). Integration stops once ``|x| > R_escape``.
    """
    if not T > 0:
        raise ValueError("horizon must be positive")
    if not 1e-12 <= tol <= 1e-3:
        raise ValueError("tol must lie in [1e-12, 1e-3]")
    y = np.array(x0, dtype=float)
    if y.shape != (f.n,):
        raise ValueError(f"initial state must have {f.n} components")
    rhs = _rhs(f, rescale)
    grid = np.linspace(0.0, T, n_samples)
    out = np.empty((n_samples, f.n))
    out[0] = y
    filled = 1
    h_min = 1e-12 * T
    t = 0.0
    k1 = rhs(y)
    scale = tol * (1 + np.linalg.norm(y))
    d0 = np.max(np.abs(y)) / scale
    d1 = np.max(np.abs(k1)) / scale
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h = min(h, T / 10)
    K = np.empty((7, f.n))
    t0s, hs, y0s, Qs = [], [], [], []
    steps = 0
    escaped = None
    while t < T and filled < n_samples:
        if steps >= max_steps:
            raise StepBudgetExhausted(f"more than {max_steps} steps before t={T}")
        h = min(h, T - t)
        if h < h_min:
            raise StepUnderflow(f"step size {h:.3e} below {h_min:.3e} at t={t:.6g}")
        K[0] = k1
        for s in range(1, 7):
            K[s] = rhs(y + h * (np.asarray(A[s]) @ K[:s]))
        y_new = y + h * (B5 @ K)
        err_vec = h * (E @ K)
        sc = tol * (1 + max(np.linalg.norm(y), np.linalg.norm(y_new)))
        err = np.max(np.abs(err_vec)) / sc
        if not np.isfinite(err):
            h *= 0.2
            continue
        if err <= 1.0:
            Q = K.T @ P_DENSE
            t0s.append(t)
            hs.append(h)
            y0s.append(y.copy())
            Qs.append(Q)
            t_new = t + h
            while filled < n_samples and grid[filled] <= t_new + 1e-12 * T:
                th = (grid[filled] - t) / h
                out[filled] = y + h * (Q @ np.array([th, th * th, th**3, th**4]))
                filled += 1
            t, y, k1 = t_new, y_new, K[6].copy()
            steps += 1
            if np.linalg.norm(y) > R_escape:
                # locate the crossing on the step's interpolant
                def excess(th):
                    return np.linalg.norm(y0s[-1] + hs[-1] * (Q @ np.array([th, th * th, th**3, th**4]))) - R_escape

                th = brentq(excess, 0.0, 1.0, xtol=1e-14) if excess(0.0) < 0 else 0.0
                escaped = t0s[-1] + th * hs[-1]
                break
            fac = 5.0 if err == 0 else min(5.0, 0.9 * err ** -0.2)
        else:
            fac = max(0.2, 0.9 * err ** -0.2)
        h *= fac
    params = {"tol": tol, "horizon": T, "rescale": rescale, "samples": n_samples, "R_escape": R_escape}
    dense = (np.array(t0s), np.array(hs), np.array(y0s), np.array(Qs))
    return TrajectoryRecord(grid[:filled].copy(), out[:filled].copy(), params, None, steps, escaped, dense)


def _returns(rec: TrajectoryRecord, i_ref: int, return_tol: float) -> list[float]:
    x, t = rec.x, rec.t
    ref = x[i_ref]
    d = np.linalg.norm(x - ref, axis=1)
    hits = []
    for i in range(1, len(d) - 1):
        if abs(i - i_ref) < 2 or not (d[i] <= d[i - 1] and d[i] <= d[i + 1]):
            continue
        # coarse screen: a true return must be reachable within one sample interval
        if d[i] > np.linalg.norm(x[i + 1] - x[i - 1]) + return_tol:
            continue
        res = minimize_scalar(
            lambda s: float(np.linalg.norm(rec.at(s) - ref)),
            bounds=(t[i - 1], t[i + 1]),
            method="bounded",
            options={"xatol": 1e-10},
        )
        if res.fun < return_tol:
            hits.append(float(res.x))
    return hits


def _periodic(rec: TrajectoryRecord, return_tol: float) -> float | None:
    n = len(rec.t)
    if n < 8:
        return None
    for i_ref in (0, n // 2):
        times = sorted(set(_returns(rec, i_ref, return_tol) + [float(rec.t[i_ref])]))
        if len(times) < 4:
            continue
        gaps = np.diff(times)
        # a stationary trajectory "returns" everywhere; require genuine motion
        i0, i1 = np.searchsorted(rec.t, times[0]), np.searchsorted(rec.t, times[1])
        travel = np.sum(np.linalg.norm(np.diff(rec.x[i0 : i1 + 1], axis=0), axis=1))
        if travel < 100 * return_tol:
            continue
        if (gaps.max() - gaps.min()) <= 1e-3 * gaps.mean():
            return float(gaps.mean())
    return None


def classify(rec: TrajectoryRecord, eps_conv: float = EPS_CONV, R_escape: float = R_ESCAPE, return_tol: float = RETURN_TOL) -> Classification:
    """Escaped, then ConvergedToOrigin, then Periodic, else Undecided."""
    norms = np.linalg.norm(rec.x, axis=1)
    if rec.escaped_at is not None or np.any(norms > R_escape):
        t_exit = rec.escaped_at if rec.escaped_at is not None else float(rec.t[np.argmax(norms > R_escape)])
        return Classification("Escaped", t_exit)
    complete = len(rec.t) and rec.t[-1] >= rec.params["horizon"] * (1 - 1e-12)
    if complete and norms[-1] < eps_conv:
        outside = np.flatnonzero(norms >= eps_conv)
        k = outside[-1] + 1 if outside.size else 0
        return Classification("ConvergedToOrigin", float(rec.t[k]))
    period = _periodic(rec, return_tol)
    if period is not None:
        return Classification("Periodic", period)
    return Classification("Undecided")


def simulate(f: VectorField, x0, **kw) -> TrajectoryRecord:
    """``integrate`` followed by ``classify``."""
    cls_kw = {k: kw.pop(k) for k in ("eps_conv", "return_tol") if k in kw}
    rec = integrate(f, x0, **kw)
    rec.classification = classify(rec, R_escape=rec.params["R_escape"], **cls_kw)
    return rec


def portrait(f: VectorField, starts: Sequence[Sequence[float]], workers: int = 1, **kw) -> list[TrajectoryRecord]:
    """Integrate and classify every start; output order follows ``starts``."""
    if workers <= 1:
        return [simulate(f, x0, **kw) for x0 in starts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda x0: simulate(f, x0, **kw), starts))


def portrait_csv(records: Sequence[TrajectoryRecord], names: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["traj_id", "t", *names])
    for k, rec in enumerate(records):
        for t, x in zip(rec.t, rec.x):
            w.writerow([k, "%.17g" % t, *("%.17g" % v for v in x)])
    return buf.getvalue()


def read_portrait_csv(text: str) -> tuple[list[str], dict[int, np.ndarray]]:
    """Parse a trajectory bundle into ``{traj_id: rows of (t, x...)}``."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or len(rows[0]) < 3 or rows[0][:2] != ["traj_id", "t"]:
        raise ValueError("not a trajectory CSV: expected header traj_id,t,x1,...")
    names = rows[0][2:]
    data: dict[int, list] = {}
    for r in rows[1:]:
        if not r:
            continue
        if len(r) != len(names) + 2:
            raise ValueError(f"row has {len(r)} fields, expected {len(names) + 2}")
        data.setdefault(int(r[0]), []).append([float(v) for v in r[1:]])
    if not data:
        raise ValueError("trajectory CSV contains no samples")
    return names, {k: np.array(v) for k, v in data.items()}
