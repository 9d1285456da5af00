"""Two-layer leaky-ReLU network with a fixed +-1/sqrt(m) output layer.

Training is plain gradient descent on the logistic or exponential loss with
a loss-adaptive step ``base_lr / (R_max^2 * max(L, floor))``.  The risk and
the per-example weights are handled in log-space, so the floor (``exp(-5e4)``
by default) sits far below the float64 range.  Every gradient
of the empirical risk lies in the row span of the training matrix, so the
iterates are stored as ``W = W0 + C @ X`` and updated through the Gram
matrix; the materialized ``W`` is identical to running the same updates on
``W`` directly, but a step costs O(m n^2) instead of O(m n d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import nnls

from .data_gen import Dataset, DistributionSpec, batch_rows, sample, sign
from .errors import TrainingFailure, ValidationError
from .geometry import OrthogonalityProfile, uniformity_ratio
from .rng import derive_seed, stream

LOSSES = ("logistic", "exponential")


@dataclass(frozen=True, eq=False)
class NetworkParams:
    W: np.ndarray
    a: np.ndarray
    gamma: float

    def __post_init__(self):
        W = np.array(self.W, dtype=float)
        a = np.array(self.a, dtype=float)
        m = W.shape[0]
        if W.ndim != 2 or m < 2 or m % 2:
            raise ValidationError("W must have an even number (>= 2) of rows")
        expected = np.r_[np.ones(m // 2), -np.ones(m // 2)] / math.sqrt(m)
        if a.shape != (m,) or not np.allclose(a, expected, rtol=0, atol=1e-15):
            raise ValidationError("a must be m/2 entries +1/sqrt(m) followed by m/2 entries -1/sqrt(m)")
        if not 0 < self.gamma <= 1:
            raise ValidationError(f"gamma must lie in (0, 1], got {self.gamma}")
        W.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def m(self) -> int:
        return int(self.W.shape[0])

    @property
    def d(self) -> int:
        return int(self.W.shape[1])

    def with_weights(self, W) -> "NetworkParams":
        return NetworkParams(W, self.a, self.gamma)

    def to_dict(self) -> dict:
        return {"W": self.W.tolist(), "a": self.a.tolist(), "gamma": self.gamma}

    @classmethod
    def from_dict(cls, obj: dict) -> "NetworkParams":
        return cls(np.array(obj["W"]), np.array(obj["a"]), obj["gamma"])


def output_signs(m: int) -> np.ndarray:
    return np.r_[np.ones(m // 2), -np.ones(m // 2)] / math.sqrt(m)


def init_network(m: int, d: int, gamma: float, scale: float, seed: int) -> NetworkParams:
    """Gaussian first layer with entry std ``scale / sqrt(d)``."""
    if m < 2 or m % 2:
        raise ValidationError(f"m must be even and >= 2, got {m}")
    if not 0 < gamma <= 1:
        raise ValidationError(f"gamma must lie in (0, 1], got {gamma}")
    if scale < 0:
        raise ValidationError("scale must be nonnegative")
    W = stream(seed, "init").standard_normal((m, d)) * (scale / math.sqrt(d))
    return NetworkParams(W, output_signs(m), gamma)


def leaky(q, gamma: float):
    return np.where(q > 0, q, gamma * q)


def leaky_deriv(q, gamma: float):
    # Clarke selection: slope gamma at the kink
    return np.where(q > 0, 1.0, gamma)


def forward(params: NetworkParams, x) -> np.ndarray | float:
    """Network output for one input vector or a batch of rows."""
    x = np.asarray(x, dtype=float)
    out = leaky(x @ params.W.T, params.gamma) @ params.a
    return float(out) if x.ndim == 1 else out


def _check_loss(loss: str):
    if loss not in LOSSES:
        raise ValidationError(f"loss must be one of {LOSSES}")


def log_loss_terms(q: np.ndarray, loss: str):
    """Elementwise ``(log l(q), log(-l'(q)))``, finite for any real margin."""
    q = np.asarray(q, dtype=float)
    if loss == "exponential":
        return -q, -q
    # logistic: l(q) = log1p(exp(-q)), -l'(q) = 1 / (1 + exp(q))
    log_neg_deriv = -np.logaddexp(0.0, q)
    small = q < 30
    qs = np.where(small, q, 30.0)
    big_u = np.exp(-np.where(small, 30.0, q))
    log_l = np.where(small, np.log(np.logaddexp(0.0, -qs)), -q + np.log1p(-0.5 * big_u))
    return log_l, log_neg_deriv


def _logsumexp(v: np.ndarray) -> float:
    mx = float(np.max(v))
    return mx + math.log(float(np.sum(np.exp(v - mx))))


def _coef(pre: np.ndarray, q: np.ndarray, y: np.ndarray, a: np.ndarray, gamma: float,
          loss: str):
    """Return ``(log L, coef)`` with ``grad/L = coef.T @ X`` (coef is n x m)."""
    n = q.size
    log_l, log_nd = log_loss_terms(q, loss)
    log_L = _logsumexp(log_l) - math.log(n)
    weights = np.exp(log_nd - math.log(n) - log_L)
    coef = -(weights * y)[:, None] * a[None, :] * leaky_deriv(pre, gamma)
    return log_L, coef


def loss_and_grad(params: NetworkParams, data: Dataset, loss: str = "logistic"):
    """Empirical risk and its gradient in ``W`` (kink slope gamma)."""
    _check_loss(loss)
    X, y = data.X, data.y_obs.astype(float)
    pre = X @ params.W.T
    q = y * (leaky(pre, params.gamma) @ params.a)
    log_L, coef = _coef(pre, q, y, params.a, params.gamma, loss)
    L = math.exp(log_L)
    return L, L * (coef.T @ X)


@dataclass
class TrainConfig:
    loss: str = "logistic"
    base_lr: float = 0.5
    log_loss_floor: float = -50_000.0
    max_steps: int = 200_000
    checkpoint_every: int = 100
    dir_tol: float = 1e-6
    margin_tol: float = 1e-5
    window: int = 10
    min_steps: int = 0


@dataclass
class TrainTrace:
    steps: list = field(default_factory=list)
    log_risk: list = field(default_factory=list)
    norm_margin: list = field(default_factory=list)
    dir_cosine: list = field(default_factory=list)
    w_norm: list = field(default_factory=list)
    converged: bool = False

    @property
    def risk(self) -> list:
        return [math.exp(v) for v in self.log_risk]

    def to_dict(self) -> dict:
        return {"steps": self.steps, "log_risk": self.log_risk, "norm_margin": self.norm_margin,
                "dir_cosine": self.dir_cosine, "w_norm": self.w_norm, "converged": self.converged}


def train_to_margin(params: NetworkParams, data: Dataset,
                    config: Optional[TrainConfig] = None) -> tuple[NetworkParams, TrainTrace]:
    """Gradient descent until the risk is below log(2)/n and the direction has settled.

    Stops at a checkpoint where (a) the risk is below ``log(2)/n``, (b) the
    cosine between successive checkpoint directions is at least
    ``1 - dir_tol``, and (c) the normalized minimum margin moved by less than
    ``margin_tol`` (relative) over the last ``window`` checkpoints.  Raises
    TrainingFailure when ``max_steps`` pass without reaching (a).
    """
    cfg = config or TrainConfig()
    _check_loss(cfg.loss)
    if params.d != data.d:
        raise ValidationError("network and data dimensions differ")
    X, y = data.X, data.y_obs.astype(float)
    n, m = data.n, params.m
    a, gamma = params.a, params.gamma
    K = X @ X.T
    W0 = params.W
    P0 = X @ W0.T                       # n x m
    w0_sq = float(np.sum(W0 * W0))
    C = np.zeros((m, n))
    lr = cfg.base_lr / float(np.max(np.diag(K)))
    log_floor = cfg.log_loss_floor
    target = math.log(math.log(2) / n)

    def sq_inner(Ca, Cb):
        return w0_sq + float(np.sum(Ca * P0.T) + np.sum(Cb * P0.T) + np.sum((Ca @ K) * Cb))

    trace = TrainTrace()
    prev_C = None
    reached = False
    step = 0
    while True:
        pre = P0 + K @ C.T
        q = y * (leaky(pre, gamma) @ a)
        log_L, coef = _coef(pre, q, y, a, gamma, cfg.loss)
        if step % cfg.checkpoint_every == 0:
            norm = math.sqrt(max(sq_inner(C, C), 0.0))
            cos = math.nan
            if prev_C is not None and norm > 0:
                cos = sq_inner(C, prev_C) / (norm * trace.w_norm[-1])
            trace.steps.append(step)
            trace.log_risk.append(log_L)
            trace.norm_margin.append(float(q.min() / norm) if norm > 0 else 0.0)
            trace.dir_cosine.append(cos)
            trace.w_norm.append(norm)
            prev_C = C.copy()
            reached = reached or log_L < target
            if reached and step >= cfg.min_steps and len(trace.steps) > cfg.window:
                recent = np.array(trace.norm_margin[-cfg.window - 1:])
                spread = (recent.max() - recent.min()) / max(abs(recent[-1]), 1e-300)
                if cos >= 1 - cfg.dir_tol and spread < cfg.margin_tol:
                    trace.converged = True
                    break
        if step >= cfg.max_steps:
            break
        # step / L with L floored; coef already carries the 1/L normalization
        scale = lr * math.exp(min(0.0, log_L - log_floor))
        C -= scale * coef.T
        step += 1

    out = params.with_weights(W0 + C @ X)
    if not reached:
        raise TrainingFailure(f"risk stayed above log(2)/n after {cfg.max_steps} steps", out, trace)
    return out, trace


def margins(params: NetworkParams, data: Dataset) -> np.ndarray:
    return data.y_obs * forward(params, data.X)


def rescale_to_unit_margin(params: NetworkParams, data: Dataset) -> NetworkParams:
    c = float(margins(params, data).min())
    if not c > 0:
        raise ValidationError(f"minimum margin must be positive, got {c}")
    return params.with_weights(params.W / c)


@dataclass(frozen=True, eq=False)
class KktCertificate:
    lam: np.ndarray
    stationarity_residual: float
    feasibility_min: float
    comp_slack_max: float
    tau: Optional[float]
    kink_count: int
    passes: bool

    def to_dict(self) -> dict:
        return {"lambda": self.lam.tolist(), "stationarity_residual": self.stationarity_residual,
                "feasibility_min": self.feasibility_min, "comp_slack_max": self.comp_slack_max,
                "tau": self.tau, "kink_count": self.kink_count, "passes": self.passes}


def extract_net_kkt(params: NetworkParams, data: Dataset, tol_kink: float = 1e-9,
                    tol_stat: float = 1e-3, tol_feas: float = 1e-6,
                    tol_cs: float = 1e-3) -> KktCertificate:
    """Recover multipliers for a unit-margin network and measure its KKT residuals.

    Slopes are 1 / gamma by the sign of each preactivation, gamma inside the
    kink band ``|pre| <= tol_kink * ||w_j|| ||x_i||``.  Multipliers solve
    ``min ||W - sum_i lam_i y_i a_j slope_ij x_i||_F`` over ``lam >= 0``.
    ``passes`` requires relative stationarity ``<= tol_stat``, minimum margin
    ``>= 1 - tol_feas``, ``comp_slack_max / max(lam) <= tol_cs``, and no
    preactivation inside the kink band.
    """
    X, y = data.X, data.y_obs.astype(float)
    W, a, gamma = params.W, params.a, params.gamma
    n, m = data.n, params.m
    pre = X @ W.T                                                   # n x m
    band = tol_kink * np.outer(np.linalg.norm(X, axis=1), np.linalg.norm(W, axis=1))
    kinks = int(np.sum(np.abs(pre) <= band))
    slope = np.where(pre > band, 1.0, gamma)

    # All candidate directions lie in span(X); solve in an orthonormal basis of it.
    Q, R = np.linalg.qr(X.T)                                        # X.T = Q R, R is r x n
    WQ = W @ Q                                                      # m x r
    perp_sq = max(float(np.sum(W * W) - np.sum(WQ * WQ)), 0.0)
    # column i: vec_j (y_i a_j slope_ij R[:, i])
    M = np.einsum("i,j,ij,ri->jri", y, a, slope, R).reshape(m * R.shape[0], n)
    b = WQ.reshape(-1)
    if not np.all(np.isfinite(M)) or not np.any(M):
        raise ValidationError("degenerate stationarity system")
    lam, _ = nnls(M, b, maxiter=50 * n)
    fit_sq = float(np.sum((M @ lam - b) ** 2))
    w_norm = math.sqrt(float(np.sum(W * W)))
    stat = math.sqrt(fit_sq + perp_sq) / w_norm if w_norm > 0 else math.inf

    marg = y * (leaky(pre, gamma) @ a)
    feas = float(marg.min() - 1.0)
    cs = float(np.max(lam * np.abs(marg - 1.0)))
    tau = uniformity_ratio((1 + gamma) / 2 * lam) if np.all(lam > 0) else None
    lam_max = float(lam.max())
    cs_rel = cs / lam_max if lam_max > 0 else math.inf
    passes = stat <= tol_stat and feas >= -tol_feas and cs_rel <= tol_cs and kinks == 0
    return KktCertificate(lam, float(stat), feas, cs, tau, kinks, bool(passes))


def _check_leaky_hypothesis(p: float, gamma: float):
    if not 0 < gamma <= 1:
        raise ValidationError(f"gamma must lie in (0, 1], got {gamma}")
    if p < 3 / gamma**3 * (1 - 1e-12):
        raise ValidationError(f"requires p >= 3 / gamma^3 = {3 / gamma**3:g}, got {p:g}")


def lambda_bounds_leaky(profile: OrthogonalityProfile, gamma: float, p: float) -> tuple[float, float]:
    """(lower, upper) bounds on KKT multipliers of the network on p-orthogonal data."""
    _check_leaky_hypothesis(p, gamma)
    pr = p * profile.r_sq
    lower = (1 - 1 / (gamma * pr - 1)) / profile.r_max_sq
    upper = 1 / (profile.r_min_sq * gamma * (gamma - 1 / pr))
    return lower, upper


def tau_bound_leaky(p: float, r_sq: float, gamma: float) -> float:
    _check_leaky_hypothesis(p, gamma)
    denom = gamma * p * r_sq - 2
    if denom <= 0:
        raise ValidationError("gamma p R^2 must exceed 2")
    return r_sq / gamma**2 * (1 + 2 / denom)


def effective_linear_direction(lam, data: Dataset, gamma: float) -> np.ndarray:
    """``(1 + gamma)/2 * sum_i lam_i y_i x_i``: the linear rule whose sign the network shares."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValidationError("multipliers must be nonnegative")
    return (1 + gamma) / 2 * ((lam * data.y_obs) @ data.X)


@dataclass(frozen=True)
class AgreementResult:
    fraction: float
    n_used: int
    n_excluded: int


def boundary_agreement(params: NetworkParams, z, probes: Optional[DistributionSpec] = None,
                       N: int = 10_000, seed: int = 0, eps: float = 1e-3,
                       batch: Optional[int] = None) -> AgreementResult:
    """Fraction of probes where ``sign f(x)`` matches ``sign <z, x>``.

    Probes come from ``probes`` (a distribution spec) or, if None, from the
    isotropic Gaussian.  Points with ``|<z, x>| < eps ||z|| ||x||`` are set
    aside.  Batch ``b`` uses seed ``derive_seed(seed, b)``, so the result does
    not depend on how batches are scheduled.  The default batch is
    ``batch_rows(d, 512)``.
    """
    z = np.asarray(z, dtype=float)
    zn = np.linalg.norm(z)
    if zn == 0:
        raise ValidationError("z must be nonzero")
    batch = batch_rows(params.d, 512) if batch is None else int(batch)
    agree = used = excluded = 0
    for b, start in enumerate(range(0, N, batch)):
        size = min(batch, N - start)
        bseed = derive_seed(seed, b)
        if probes is None:
            Xp = stream(bseed, "probes").standard_normal((size, params.d))
        else:
            Xp = sample(probes, size, bseed).X
        lin = Xp @ z
        keep = np.abs(lin) >= eps * zn * np.linalg.norm(Xp, axis=1)
        excluded += int(size - keep.sum())
        if keep.any():
            f = forward(params, Xp[keep])
            agree += int(np.sum(sign(f) == sign(lin[keep])))
            used += int(keep.sum())
    frac = agree / used if used else math.nan
    return AgreementResult(frac, used, excluded)
