"""Closed-form test-error bounds and the quantities that drive them.

Absolute constants that the theory leaves unspecified are arguments
(default 1.0) and are recorded in every :class:`BoundValue`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data_gen import ClustSpec
from .errors import ValidationError

ETA_LIMIT = 0.49


@dataclass(frozen=True)
class BoundValue:
    value: float
    raw: float
    constants_used: dict = field(default_factory=dict)
    formula_id: str = ""

    def to_dict(self) -> dict:
        return {"value": self.value, "raw": self.raw, "constants_used": dict(self.constants_used),
                "formula_id": self.formula_id}


def _clamp(raw: float, eta: float) -> float:
    return min(1.0, max(eta, raw))


def sg_test_bound(lam, eta: float, c_prime: float = 1.0) -> BoundValue:
    """``eta + C' sqrt(r) (1 + sqrt(max(0, log(1/r) / 2)))`` with ``r = tr(S_{2:d}^2) / lam_1^2``."""
    lam = np.asarray(lam, dtype=float)
    if lam.size == 0 or not lam[0] > 0:
        raise ValidationError("lam[0] must be positive")
    tail_sq = float(np.sum(lam[1:] ** 2))
    if tail_sq == 0:
        raw = eta
    else:
        r = tail_sq / lam[0] ** 2
        raw = eta + c_prime * math.sqrt(r) * (1 + math.sqrt(max(0.0, 0.5 * math.log(1 / r))))
    return BoundValue(_clamp(raw, eta), raw, {"C'": c_prime}, "sg_tau_uniform")


def clust_test_bound(means, n: int, k: int, d: int, eta: float, c_prime: float = 1.0) -> BoundValue:
    """``eta + exp(-n min_q ||mu_q||^4 / (C' k^2 d))``."""
    if min(n, k, d) < 1:
        raise ValidationError("n, k and d must be >= 1")
    means = np.atleast_2d(np.asarray(means, dtype=float))
    min_sq = float(np.min(np.sum(means**2, axis=1)))
    raw = eta + math.exp(-n * min_sq**2 / (c_prime * k**2 * d))
    return BoundValue(_clamp(raw, eta), raw, {"C'": c_prime}, "clust_tau_uniform")


def sg_alignment(w, lam) -> float:
    """``||[S^{1/2} w]_{2:d}|| / (sqrt(lam_1) w_1)``; requires ``w_1 > 0``."""
    w = np.asarray(w, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if w.shape != lam.shape:
        raise ValidationError("w and lam must have the same length")
    if not w[0] > 0:
        raise ValidationError("alignment is defined only for w[0] > 0")
    tail = float(np.linalg.norm(np.sqrt(lam[1:]) * w[1:]))
    if tail == 0:
        return 0.0
    head = math.sqrt(lam[0]) * w[0]
    return tail / head if head > 0 else math.inf


@dataclass(frozen=True, eq=False)
class ClusterExponents:
    exponents: np.ndarray       # <w, mu_q>^2 / ||w||^2
    aligned: np.ndarray         # y_q <w, mu_q> >= 0


def cluster_margin_exponents(w, spec: ClustSpec) -> ClusterExponents:
    w = np.asarray(w, dtype=float)
    wn_sq = float(w @ w)
    if wn_sq == 0:
        raise ValidationError("w must be nonzero")
    proj = spec.means @ w
    return ClusterExponents(proj**2 / wn_sq, spec.cluster_labels * proj >= 0)


def eta_limit_linear() -> float:
    return ETA_LIMIT


def eta_limit_leaky(gamma: float) -> float:
    if not 0 < gamma <= 1:
        raise ValidationError(f"gamma must lie in (0, 1], got {gamma}")
    return ETA_LIMIT * gamma**2


def sg_noise_tolerated(eta: float, tau: float, gap: float) -> bool:
    """Noise condition ``eta <= 1/(2 tau) - gap`` for tau-uniform rules (sub-Gaussian model)."""
    return eta <= 1 / (2 * tau) - gap


def clust_noise_tolerated(eta: float, tau: float, gap: float) -> bool:
    """Noise condition ``eta <= 1/(1 + tau) - gap`` (cluster model); ``gap`` has no default."""
    return eta <= 1 / (1 + tau) - gap
