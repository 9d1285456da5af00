"""Bias-free hard-margin linear classifier.

``solve_max_margin`` runs exact cyclic coordinate ascent on the dual

    max_{lam >= 0}  sum_i lam_i - 1/2 sum_ij lam_i lam_j y_i y_j <x_i, x_j>

and returns the primal ``w = sum_i lam_i y_i x_i``.  ``brute_force_max_margin``
enumerates supports and is kept independent of the dual solver so the two
can be checked against each other.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, nnls

from .data_gen import Dataset
from .errors import InfeasibleError, ValidationError
from .geometry import OrthogonalityProfile


@dataclass(frozen=True, eq=False)
class MarginSolution:
    w: np.ndarray
    lam: np.ndarray
    margins: np.ndarray
    objective: float
    iterations: int
    converged: bool
    dual_trace: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {"w": self.w.tolist(), "lambda": self.lam.tolist(),
                "margins": self.margins.tolist(), "objective": self.objective,
                "iterations": self.iterations, "converged": self.converged}


@dataclass(frozen=True)
class KktReport:
    stationarity: float
    primal_feasibility: float
    dual_feasibility: float
    comp_slackness: float
    tol: float
    passes: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify_linear_kkt(sol: MarginSolution, data: Dataset, tol: float = 1e-6) -> KktReport:
    """KKT residuals of ``(sol.w, sol.lam)`` on ``data``, recomputed from scratch."""
    w, lam = np.asarray(sol.w, float), np.asarray(sol.lam, float)
    if w.shape != (data.d,) or lam.shape != (data.n,):
        raise ValidationError("dimension mismatch")
    y, X = data.y_obs, data.X
    margins = y * (X @ w)
    diff = np.linalg.norm(w - (lam * y) @ X)
    wn = np.linalg.norm(w)
    stat = diff / wn if wn > 0 else diff
    primal = float(margins.min() - 1.0)
    dual = float(lam.min())
    cs = float(np.max(np.abs(lam * (margins - 1.0))))
    passes = stat <= tol and primal >= -tol and dual >= -tol and cs <= tol
    return KktReport(float(stat), primal, dual, cs, tol, bool(passes))


def _separable(X: np.ndarray, y: np.ndarray) -> bool:
    # Feasibility LP for y_i <w, x_i> >= 1.
    n, d = X.shape
    res = linprog(np.zeros(d), A_ub=-(y[:, None] * X), b_ub=-np.ones(n),
                  bounds=[(None, None)] * d, method="highs")
    return res.status != 2


def solve_max_margin(data: Dataset, tol: float = 1e-8, max_iter: int = 100_000,
                     lambda_cap: float | None = None, polish_every: int = 10,
                     separability_check_after: int = 200) -> MarginSolution:
    """Hard-margin solution by exact dual coordinate ascent.

    Each coordinate update is ``lam_i <- max(0, lam_i + (1 - margin_i) / ||x_i||^2)``.
    Every ``polish_every`` sweeps the equality system on the current support
    is re-solved by nonnegative least squares; the result is kept only if it
    satisfies the KKT conditions to ``tol``.

    Convergence means every active example has margin within ``tol`` of 1
    and every inactive one has margin at least ``1 - tol``.

    Raises InfeasibleError if the multipliers exceed ``lambda_cap``
    (default ``1e8 / min ||x_i||^2``), if an LP feasibility check run after
    ``separability_check_after`` unconverged sweeps finds no separator, or if
    ``max_iter`` sweeps pass without convergence.
    """
    X, y = data.X, data.y_obs.astype(float)
    n = data.n
    G = X @ X.T
    K = (y[:, None] * y[None, :]) * G
    diag = np.diag(K).copy()
    if np.any(diag <= 0):
        raise InfeasibleError("a zero example cannot satisfy a unit margin")
    cap = lambda_cap if lambda_cap is not None else 1e8 / diag.min()

    lam = np.zeros(n)
    margins = np.zeros(n)
    dual = [0.0]

    def kkt_ok(lam_, m_):
        # projected dual gradient: active => margin 1, inactive => margin >= 1
        r = np.where(lam_ > 0, np.abs(m_ - 1.0), np.maximum(0.0, 1.0 - m_))
        return r.max() <= tol

    def finish(lam_, it, converged):
        w = (lam_ * y) @ X
        m_ = y * (X @ w)
        return MarginSolution(w, lam_, m_, float(w @ w), it, converged, tuple(dual))

    for sweep in range(1, max_iter + 1):
        for i in range(n):
            new = max(0.0, lam[i] + (1.0 - margins[i]) / diag[i])
            step = new - lam[i]
            if step != 0.0:
                lam[i] = new
                margins += step * K[:, i]
        dual.append(float(lam.sum() - 0.5 * lam @ margins))

        if kkt_ok(lam, margins):
            return finish(lam, sweep, True)
        if lam.max() > cap:
            raise InfeasibleError("dual multipliers diverged; data not separable", finish(lam, sweep, False))
        if sweep % polish_every == 0:
            S = np.flatnonzero(lam > 0)
            if S.size:
                cand = np.zeros(n)
                cand[S] = nnls(K[np.ix_(S, S)], np.ones(S.size))[0]
                m_c = K @ cand
                if kkt_ok(cand, m_c):
                    dual.append(float(cand.sum() - 0.5 * cand @ m_c))
                    return finish(cand, sweep, True)
        if sweep == separability_check_after and not _separable(X, y):
            raise InfeasibleError("no linear separator exists", finish(lam, sweep, False))

    raise InfeasibleError(f"no convergence within {max_iter} sweeps", finish(lam, max_iter, False))


def brute_force_max_margin(data: Dataset, feas_tol: float = 1e-9) -> MarginSolution:
    """Minimum-norm feasible ``w`` by enumerating every candidate support set.

    Exponential in ``n``; intended as an oracle for ``n <= 12``.
    """
    n = data.n
    if n > 12:
        raise ValidationError("brute force limited to n <= 12")
    A = data.y_obs[:, None] * data.X
    best = None
    best_obj = math.inf
    for size in range(1, n + 1):
        for S in itertools.combinations(range(n), size):
            AS = A[list(S)]
            w = np.linalg.lstsq(AS, np.ones(size), rcond=None)[0]
            if not np.allclose(AS @ w, 1.0, rtol=0, atol=1e-9):
                continue
            lam_S = np.linalg.lstsq(AS.T, w, rcond=None)[0]
            if np.any(lam_S < -1e-12) or np.linalg.norm(AS.T @ lam_S - w) > 1e-9 * (1 + np.linalg.norm(w)):
                continue
            if np.min(A @ w) < 1 - feas_tol:
                continue
            obj = float(w @ w)
            # ties within 1e-12 keep the earlier (lexicographically smaller) support
            if best is None or obj < best_obj - 1e-12 * max(1.0, best_obj):
                lam = np.zeros(n)
                lam[list(S)] = np.maximum(lam_S, 0.0)
                best, best_obj = (w, lam), obj
    if best is None:
        raise InfeasibleError("no feasible support set; data not separable")
    w, lam = best
    return MarginSolution(w, lam, A @ w, best_obj, 0, True)


def tau_bound_linear(p: float, r_sq: float) -> float:
    """Uniformity ratio guaranteed for the max-margin multipliers on p-orthogonal data."""
    if p < 3 or r_sq < 1:
        raise ValidationError("requires p >= 3 and R^2 >= 1")
    denom = p * r_sq - 2
    if denom <= 0:
        raise ValidationError("p R^2 must exceed 2")
    return r_sq * (1 + 2 / denom)


def lambda_bounds_linear(profile: OrthogonalityProfile, p: float) -> tuple[float, float]:
    """(lower, upper) bounds on every multiplier for p-orthogonal data."""
    if p < 3:
        raise ValidationError("requires p >= 3")
    pr = p * profile.r_sq
    if pr <= 1:
        raise ValidationError("p R^2 must exceed 1")
    lower = (1 - 1 / (pr - 1)) / profile.r_max_sq
    upper = 1 / (profile.r_min_sq * (1 - 1 / pr))
    return lower, upper
