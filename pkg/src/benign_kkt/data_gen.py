"""Samplers for the sub-Gaussian, Gaussian, clustered and opposing-cluster models.

All samplers are pure functions of ``(spec, n, seed)``.  Covariates, clean
labels, cluster indices and label flips are drawn from separate substreams
(see :mod:`benign_kkt.rng`), so two datasets that differ only in ``eta``
share ``X`` and ``y_clean`` exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import ValidationError
from .rng import check_seed, stream

BASE_DISTS = ("gaussian", "rademacher", "uniform_scaled")

# Anti-concentration constant of N(0, 1): P(|z| <= t) <= t * sqrt(2/pi).
GAUSSIAN_BETA = math.sqrt(2.0 / math.pi)

FORMAT_VERSION = 1


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _check_eta(eta: float) -> float:
    eta = float(eta)
    if not 0.0 <= eta < 0.5:
        raise ValidationError(f"eta must lie in [0, 1/2), got {eta}")
    return eta


def _check_base(base: str) -> str:
    if base not in BASE_DISTS:
        raise ValidationError(f"base_dist must be one of {BASE_DISTS}, got {base!r}")
    return base


def draw_base(rng: np.random.Generator, base: str, size) -> np.ndarray:
    """Independent, mean-zero, unit-variance entries from the named base law."""
    if base == "gaussian":
        return rng.standard_normal(size)
    if base == "rademacher":
        return rng.integers(0, 2, size=size).astype(float) * 2.0 - 1.0
    if base == "uniform_scaled":
        s = math.sqrt(3.0)
        return rng.uniform(-s, s, size=size)
    raise ValidationError(f"unknown base_dist {base!r}")


def batch_rows(d: int, cap: int = 4096, budget: int = 1 << 22) -> int:
    """Rows per sampling batch so that a batch holds at most ``budget`` entries."""
    return max(1, min(cap, budget // max(1, int(d))))


def sign(v) -> np.ndarray:
    """Elementwise sign with sign(0) = +1, as integers."""
    return np.where(np.asarray(v) >= 0, 1, -1).astype(np.int64)


@dataclass(frozen=True, eq=False)
class SgSpec:
    """Sub-Gaussian model: ``x = diag(lam)^{1/2} z``, label = sign of ``x[0]``.

    ``beta`` is the anti-concentration constant of ``z[0]``; it is recorded
    for reference and not used by the sampler.
    """

    lam: np.ndarray
    eta: float
    base_dist: str = "gaussian"
    beta: Optional[float] = None

    kind = "sg"

    def __post_init__(self):
        lam = _frozen(self.lam)
        if lam.ndim != 1 or lam.size < 1:
            raise ValidationError("lam must be a nonempty vector")
        if not np.all(np.isfinite(lam)) or np.any(lam < 0):
            raise ValidationError("lam entries must be finite and nonnegative")
        if np.any(np.diff(lam) > 0):
            raise ValidationError("lam must be sorted nonincreasing")
        if lam[0] <= 0:
            raise ValidationError("lam[0] must be positive")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "eta", _check_eta(self.eta))
        object.__setattr__(self, "base_dist", _check_base(self.base_dist))
        if self.beta is None and self.base_dist == "gaussian":
            object.__setattr__(self, "beta", GAUSSIAN_BETA)

    @property
    def d(self) -> int:
        return int(self.lam.size)

    @classmethod
    def gaussian_family(cls, d: int, rho: float, eta: float) -> "SgSpec":
        """Gaussian covariates with covariance ``diag(d**rho, 1, ..., 1)``."""
        lam = np.ones(int(d))
        lam[0] = float(d) ** rho
        return cls(lam=lam, eta=eta, base_dist="gaussian")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lam": self.lam.tolist(), "eta": self.eta,
                "base_dist": self.base_dist, "beta": self.beta}


@dataclass(frozen=True, eq=False)
class ClustSpec:
    """Cluster model: ``x = means[q] + noise_scale * z`` with ``q`` uniform over clusters.

    ``noise_scale = 1`` gives ``E||z||^2 = d``; 0 collapses every point onto its mean.
    """

    means: np.ndarray
    cluster_labels: np.ndarray
    eta: float
    base_dist: str = "gaussian"
    noise_scale: float = 1.0

    kind = "clust"

    def __post_init__(self):
        means = _frozen(self.means)
        labels = _frozen(self.cluster_labels, dtype=np.int64)
        if means.ndim != 2:
            raise ValidationError("means must be a k x d matrix")
        k = means.shape[0]
        if k < 2:
            raise ValidationError(f"need at least 2 clusters, got {k}")
        if means.shape[1] < 1 or not np.all(np.isfinite(means)):
            raise ValidationError("means must be finite with d >= 1")
        if labels.shape != (k,) or not np.all(np.abs(labels) == 1):
            raise ValidationError("cluster_labels must be k values in {-1, +1}")
        if self.noise_scale < 0:
            raise ValidationError("noise_scale must be nonnegative")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "cluster_labels", labels)
        object.__setattr__(self, "eta", _check_eta(self.eta))
        object.__setattr__(self, "base_dist", _check_base(self.base_dist))
        object.__setattr__(self, "noise_scale", float(self.noise_scale))

    @property
    def k(self) -> int:
        return int(self.means.shape[0])

    @property
    def d(self) -> int:
        return int(self.means.shape[1])

    @classmethod
    def orthogonal(cls, d: int, k: int, norm: float, eta: float, labels=None) -> "ClustSpec":
        """Means ``norm * e_q`` for ``q < k``; labels alternate +1, -1, ... unless given."""
        means = np.zeros((k, d))
        means[np.arange(k), np.arange(k)] = norm
        if labels is None:
            labels = [1 if q % 2 == 0 else -1 for q in range(k)]
        return cls(means=means, cluster_labels=labels, eta=eta)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "means": self.means.tolist(),
                "cluster_labels": self.cluster_labels.tolist(), "eta": self.eta,
                "base_dist": self.base_dist, "noise_scale": self.noise_scale}


@dataclass(frozen=True, eq=False)
class OppSpec:
    """Two opposing Gaussian clusters: ``x = y_clean * mu + z``, ``z ~ N(0, I)``."""

    mu: np.ndarray
    eta: float

    kind = "opp"

    def __post_init__(self):
        mu = _frozen(self.mu)
        if mu.ndim != 1 or mu.size < 1 or not np.all(np.isfinite(mu)):
            raise ValidationError("mu must be a finite nonempty vector")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "eta", _check_eta(self.eta))

    @property
    def d(self) -> int:
        return int(self.mu.size)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "mu": self.mu.tolist(), "eta": self.eta}


DistributionSpec = Union[SgSpec, ClustSpec, OppSpec]


def spec_from_dict(obj: Optional[dict]) -> Optional[DistributionSpec]:
    if obj is None:
        return None
    obj = dict(obj)
    kind = obj.pop("kind")
    if kind == "sg":
        return SgSpec(**obj)
    if kind == "clust":
        return ClustSpec(**obj)
    if kind == "opp":
        return OppSpec(**obj)
    raise ValidationError(f"unknown spec kind {kind!r}")


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y_clean: np.ndarray
    y_obs: np.ndarray
    noise_mask: np.ndarray
    spec: Optional[DistributionSpec]
    seed: int
    cluster_id: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        X = _frozen(self.X)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValidationError("X must be an n x d matrix with n, d >= 1")
        if not np.all(np.isfinite(X)):
            raise ValidationError("X has non-finite entries")
        n = X.shape[0]
        y_clean = _frozen(self.y_clean, dtype=np.int64)
        y_obs = _frozen(self.y_obs, dtype=np.int64)
        mask = _frozen(self.noise_mask, dtype=bool)
        for name, v in (("y_clean", y_clean), ("y_obs", y_obs), ("noise_mask", mask)):
            if v.shape != (n,):
                raise ValidationError(f"{name} must have length {n}")
        if not (np.all(np.abs(y_clean) == 1) and np.all(np.abs(y_obs) == 1)):
            raise ValidationError("labels must be exactly +-1")
        if not np.array_equal(mask, y_obs != y_clean):
            raise ValidationError("noise_mask inconsistent with y_obs / y_clean")
        is_clust = isinstance(self.spec, ClustSpec)
        if (self.cluster_id is not None) != is_clust:
            raise ValidationError("cluster_id is present iff the spec is a cluster model")
        if self.cluster_id is not None:
            cid = _frozen(self.cluster_id, dtype=np.int64)
            if cid.shape != (n,) or cid.min() < 0 or cid.max() >= self.spec.k:
                raise ValidationError("cluster_id out of range")
            object.__setattr__(self, "cluster_id", cid)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y_clean", y_clean)
        object.__setattr__(self, "y_obs", y_obs)
        object.__setattr__(self, "noise_mask", mask)
        object.__setattr__(self, "seed", check_seed(self.seed))

    @classmethod
    def from_arrays(cls, X, y, seed: int = 0) -> "Dataset":
        """Hand-built dataset with no generating spec and no label noise."""
        y = np.asarray(y, dtype=np.int64)
        return cls(np.atleast_2d(np.asarray(X, dtype=float)), y, y, np.zeros(y.size, bool), None, seed)

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def d(self) -> int:
        return int(self.X.shape[1])

    @property
    def clean_idx(self) -> np.ndarray:
        return np.flatnonzero(~self.noise_mask)

    @property
    def noisy_idx(self) -> np.ndarray:
        return np.flatnonzero(self.noise_mask)


def _check_n(n: int) -> int:
    n = int(n)
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    return n


def _flip(y_clean: np.ndarray, eta: float, seed: int):
    mask = stream(seed, "flips").random(y_clean.size) < eta
    return np.where(mask, -y_clean, y_clean), mask


def sample_sg(spec: SgSpec, n: int, seed: int) -> Dataset:
    n = _check_n(n)
    z = draw_base(stream(seed, "covariates"), spec.base_dist, (n, spec.d))
    X = z * np.sqrt(spec.lam)
    y_clean = sign(X[:, 0])
    y_obs, mask = _flip(y_clean, spec.eta, seed)
    return Dataset(X, y_clean, y_obs, mask, spec, seed)


def sample_clust(spec: ClustSpec, n: int, seed: int) -> Dataset:
    n = _check_n(n)
    q = stream(seed, "clusters").integers(0, spec.k, size=n)
    z = draw_base(stream(seed, "covariates"), spec.base_dist, (n, spec.d))
    X = spec.means[q] + spec.noise_scale * z
    y_clean = spec.cluster_labels[q]
    y_obs, mask = _flip(y_clean, spec.eta, seed)
    return Dataset(X, y_clean, y_obs, mask, spec, seed, cluster_id=q)


def sample_opp(spec: OppSpec, n: int, seed: int) -> Dataset:
    n = _check_n(n)
    y_clean = stream(seed, "clean_labels").integers(0, 2, size=n) * 2 - 1
    z = stream(seed, "covariates").standard_normal((n, spec.d))
    X = y_clean[:, None] * spec.mu + z
    y_obs, mask = _flip(y_clean, spec.eta, seed)
    return Dataset(X, y_clean, y_obs, mask, spec, seed)


def sample(spec: DistributionSpec, n: int, seed: int) -> Dataset:
    if isinstance(spec, SgSpec):
        return sample_sg(spec, n, seed)
    if isinstance(spec, ClustSpec):
        return sample_clust(spec, n, seed)
    if isinstance(spec, OppSpec):
        return sample_opp(spec, n, seed)
    raise ValidationError(f"unsupported spec type {type(spec).__name__}")


# -- serialization ---------------------------------------------------------

def _header(ds: Dataset) -> dict:
    spec = None if ds.spec is None else ds.spec.to_dict()
    return {"format_version": FORMAT_VERSION, "seed": ds.seed, "spec": spec}


def save_dataset(ds: Dataset, path) -> Path:
    """Write ``ds`` as ``.npz``, ``.csv`` or ``.json`` (chosen by suffix); all round-trip exactly."""
    path = Path(path)
    if path.suffix == ".csv":
        path.write_text(dataset_to_csv(ds))
        return path
    if path.suffix == ".json":
        path.write_text(json.dumps(dataset_to_dict(ds)))
        return path
    arrays = dict(X=ds.X, y_clean=ds.y_clean, y_obs=ds.y_obs, noise_mask=ds.noise_mask,
                  header=np.array(json.dumps(_header(ds))))
    if ds.cluster_id is not None:
        arrays["cluster_id"] = ds.cluster_id
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_dataset(path) -> Dataset:
    path = Path(path)
    if path.suffix == ".csv":
        return dataset_from_csv(path.read_text())
    if path.suffix == ".json":
        return dataset_from_dict(json.loads(path.read_text()))
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        cid = z["cluster_id"] if "cluster_id" in z.files else None
        return Dataset(z["X"], z["y_clean"], z["y_obs"], z["noise_mask"],
                       spec_from_dict(header["spec"]), header["seed"], cluster_id=cid)


def dataset_to_dict(ds: Dataset) -> dict:
    out = _header(ds)
    out.update(X=ds.X.tolist(), y_clean=ds.y_clean.tolist(), y_obs=ds.y_obs.tolist(),
               cluster_id=None if ds.cluster_id is None else ds.cluster_id.tolist())
    return out


def dataset_from_dict(obj: dict) -> Dataset:
    y_clean = np.asarray(obj["y_clean"], dtype=np.int64)
    y_obs = np.asarray(obj["y_obs"], dtype=np.int64)
    return Dataset(obj["X"], y_clean, y_obs, y_obs != y_clean, spec_from_dict(obj["spec"]),
                   obj["seed"], cluster_id=obj.get("cluster_id"))


def dataset_to_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(_header(ds)) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "cluster_id", "y_clean", "y_obs"] + [f"x_{j + 1}" for j in range(ds.d)])
    for i in range(ds.n):
        cid = "" if ds.cluster_id is None else int(ds.cluster_id[i])
        w.writerow([i, cid, int(ds.y_clean[i]), int(ds.y_obs[i])] + [repr(float(v)) for v in ds.X[i]])
    return buf.getvalue()


def dataset_from_csv(text: str) -> Dataset:
    first, _, body = text.partition("\n")
    if not first.startswith("# "):
        raise ValidationError("CSV dataset is missing its JSON header line")
    header = json.loads(first[2:])
    rows = list(csv.reader(io.StringIO(body)))[1:]
    X = np.array([[float(v) for v in r[4:]] for r in rows])
    y_clean = np.array([int(r[2]) for r in rows])
    y_obs = np.array([int(r[3]) for r in rows])
    cid = None if rows[0][1] == "" else np.array([int(r[1]) for r in rows])
    return Dataset(X, y_clean, y_obs, y_obs != y_clean, spec_from_dict(header["spec"]),
                   header["seed"], cluster_id=cid)
