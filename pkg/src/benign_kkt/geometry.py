"""Orthogonality profile, uniformity ratios, spectral functionals and assumption checks."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .data_gen import ClustSpec, Dataset, SgSpec
from .errors import ValidationError


@dataclass(frozen=True)
class OrthogonalityProfile:
    """Norm spread and worst pairwise correlation of a training set.

    ``p_star`` is ``None`` when the examples are exactly orthogonal (every
    ``p`` works); otherwise it is the largest ``p`` for which the data is
    p-orthogonal.
    """

    n: int
    r_min_sq: float
    r_max_sq: float
    r_sq: float
    zeta: float
    p_star: Optional[float]

    def is_p_orthogonal(self, p: float) -> bool:
        return self.p_star is None or p <= self.p_star

    @property
    def p_star_value(self) -> float:
        return math.inf if self.p_star is None else self.p_star

    def to_dict(self) -> dict:
        return asdict(self)


def orthogonality_profile(data) -> OrthogonalityProfile:
    """Profile of a :class:`Dataset` (or a bare n x d matrix)."""
    X = data.X if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    n = X.shape[0]
    if n < 2:
        raise ValidationError("orthogonality profile needs at least 2 examples")
    G = X @ X.T
    sq = np.diag(G).copy()
    r_min_sq, r_max_sq = float(sq.min()), float(sq.max())
    if r_min_sq <= 0:
        raise ValidationError("examples must be nonzero")
    off = np.abs(G[~np.eye(n, dtype=bool)])
    zeta = float(off.max())
    r_sq = r_max_sq / r_min_sq
    p_star = None if zeta == 0 else r_min_sq / (r_sq * n * zeta)
    return OrthogonalityProfile(n, r_min_sq, r_max_sq, r_sq, zeta, p_star)


def uniformity_ratio(s) -> float:
    """``max(s) / min(s)`` for a strictly positive coefficient vector."""
    s = np.asarray(s, dtype=float)
    if s.size == 0 or np.any(~(s > 0)):
        raise ValidationError("uniformity coefficients must be strictly positive")
    return float(s.max() / s.min())


def check_tau_uniform(w, data: Dataset, s, tol: float) -> bool:
    """True iff ``w`` equals ``sum_i s_i y_i x_i`` to relative ``tol`` with all ``s_i > 0``."""
    w = np.asarray(w, dtype=float)
    s = np.asarray(s, dtype=float)
    if w.shape != (data.d,) or s.shape != (data.n,):
        raise ValidationError("dimension mismatch")
    if np.any(~(s > 0)):
        return False
    resid = np.linalg.norm(w - (s * data.y_obs) @ data.X)
    return bool(resid <= tol * np.linalg.norm(w))


def _spectrum(diag) -> np.ndarray:
    lam = np.asarray(diag, dtype=float)
    if lam.size == 0 or np.any(lam < 0) or not np.any(lam > 0):
        raise ValidationError("eigenvalues must be nonnegative and not all zero")
    return lam


def stable_rank(diag) -> float:
    """``||M||_F^2 / ||M||_2^2`` for ``M = diag(diag)``."""
    lam = _spectrum(diag)
    return float(np.sum(lam**2) / np.max(lam) ** 2)


def effective_rank_ratio(lam) -> float:
    """``tr(S) / sqrt(tr(S^2))`` for ``S = diag(lam)``."""
    lam = _spectrum(lam)
    return float(lam.sum() / math.sqrt(np.sum(lam**2)))


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    lhs: float
    rhs: float
    satisfied: bool
    margin_ratio: float


def _check(name: str, lhs: float, rhs: float) -> AssumptionCheck:
    ratio = lhs / rhs if rhs > 0 else math.inf
    return AssumptionCheck(name, float(lhs), float(rhs), bool(lhs >= rhs), float(ratio))


@dataclass(frozen=True)
class AssumptionReport:
    checks: tuple

    @property
    def all_satisfied(self) -> bool:
        return all(c.satisfied for c in self.checks)

    def __getitem__(self, name: str) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"checks": [asdict(c) for c in self.checks], "all_satisfied": self.all_satisfied}


def _check_delta_C(delta: float, C: float):
    if not 0 < delta < 0.5:
        raise ValidationError(f"delta must be in (0, 1/2), got {delta}")
    if not C > 1:
        raise ValidationError(f"C must exceed 1, got {C}")


def sg_assumption_report(spec: SgSpec, n: int, delta: float, C: float) -> AssumptionReport:
    # natural logarithms throughout
    _check_delta_C(delta, C)
    tail = spec.lam[1:]
    sr = stable_rank(tail) if tail.size and np.any(tail > 0) else 0.0
    return AssumptionReport((
        _check("SG1", n, C * math.log(6 / delta)),
        _check("SG2", sr, C * math.log(6 * n / delta)),
        _check("SG3", effective_rank_ratio(spec.lam), C * n * math.log(6 * n**2 / delta)),
    ))


def clust_assumption_report(spec: ClustSpec, n: int, delta: float, C: float) -> AssumptionReport:
    _check_delta_C(delta, C)
    k, d = spec.k, spec.d
    norms_sq = np.sum(spec.means**2, axis=1)
    G = spec.means @ spec.means.T
    cross = float(np.max(np.abs(G[~np.eye(k, dtype=bool)])))
    return AssumptionReport((
        _check("CL1", n, C * k**2 * math.log(k / delta)),
        _check("CL2", d, C * max(n * norms_sq.max(), n**2 * math.log(n / delta))),
        _check("CL3", math.sqrt(norms_sq.min()), C * k * math.sqrt(math.log(2 * n * k / delta))),
        _check("CL4", norms_sq.min(), C * k * cross),
    ))
