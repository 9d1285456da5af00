"""End-to-end experiments: config -> per-seed pipeline -> records -> CSV/JSON.

A config is a nested mapping (YAML or JSON on disk)::

    distribution: {family: sg_gaussian, d: 4000, rho: 0.75, eta: 0.1}
    n: 20
    seeds: [0, 1, 2]
    model: {type: leaky_net, m: 32, gamma: 0.5, scale: 1.0e-4}
    evaluation: {N: 100000, ci_level: 0.99}
    bounds: {c_prime: 1.0, delta: 0.1, C: 2.0, gap: 0.05}

Distribution families: ``sg_gaussian`` (d, rho, eta), ``sg`` (lam, eta,
base_dist), ``clust_orthogonal`` (d, k, eta and either ``norm`` or
``norm_exponent`` meaning ``norm = d ** norm_exponent``), ``clust`` (means,
cluster_labels, eta), ``opp`` (d, mu_norm, eta; ``mu = mu_norm * e_1``) and
``file`` (path to a saved dataset, reused for every seed).
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml
from scipy import stats

from . import bounds as bnd
from .data_gen import (ClustSpec, Dataset, DistributionSpec, OppSpec, SgSpec, load_dataset,
                       sample)
from .errors import InfeasibleError, TrainingFailure, ValidationError
from .evaluation import (interpolation_check, test_error_exact_sg_gaussian, test_error_mc,
                         train_error)
from .geometry import (clust_assumption_report, orthogonality_profile, sg_assumption_report,
                       uniformity_ratio)
from .leaky_net import (TrainConfig, boundary_agreement, effective_linear_direction,
                        extract_net_kkt, init_network, lambda_bounds_leaky, rescale_to_unit_margin,
                        tau_bound_leaky, train_to_margin)
from .linear_maxmargin import (lambda_bounds_linear, solve_max_margin, tau_bound_linear,
                               verify_linear_kkt)
from .rng import STREAMS, check_seed, derive_seed

SCHEMA_VERSION = 1
FAMILIES = ("sg_gaussian", "sg", "clust_orthogonal", "clust", "opp", "file")
MODELS = ("linear", "leaky_net")

COMMON_COLUMNS = [
    "schema_version", "seed", "model", "status", "message", "n", "d", "eta",
    "r_min_sq", "r_max_sq", "r_sq", "zeta", "p_star", "assumptions_satisfied",
    "train_error", "interpolates", "tau", "tau_bound", "lam_min", "lam_max",
    "lam_lower_bound", "lam_upper_bound", "lam_in_bounds", "kkt_passes",
    "test_error", "test_ci_low", "test_ci_high", "test_error_exact",
    "bound_value", "bound_formula", "noise_tolerated", "wall_clock",
]
NET_COLUMNS = ["train_steps", "stationarity_residual", "kink_count",
               "boundary_agreement", "agreement_used"]
LINEAR_COLUMNS = ["solver_iterations", "dual_objective"]


def columns_for(model: str) -> list[str]:
    """Fixed CSV column order for a model type."""
    extra = NET_COLUMNS if model == "leaky_net" else LINEAR_COLUMNS
    return COMMON_COLUMNS[:-1] + extra + ["wall_clock"]


# -- configuration ---------------------------------------------------------

@dataclass
class ExperimentConfig:
    distribution: dict
    n: int
    seeds: list
    model: dict = field(default_factory=lambda: {"type": "linear"})
    solver: dict = field(default_factory=dict)
    training: dict = field(default_factory=dict)
    evaluation: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        self.validate()

    # defaults are filled here so records and provenance show effective values
    def validate(self):
        if not isinstance(self.distribution, dict) or self.distribution.get("family") not in FAMILIES:
            raise ValidationError(f"distribution.family must be one of {FAMILIES}")
        self.n = int(self.n)
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if not self.seeds:
            raise ValidationError("seed list must be nonempty")
        self.seeds = [check_seed(s) for s in self.seeds]
        mtype = self.model.get("type")
        if mtype not in MODELS:
            raise ValidationError(f"model.type must be one of {MODELS}")
        if mtype == "leaky_net":
            self.model = {"m": 32, "gamma": 0.5, "scale": 1e-4, **self.model}
            m, g = int(self.model["m"]), float(self.model["gamma"])
            if m < 2 or m % 2:
                raise ValidationError("model.m must be even and >= 2")
            if not 0 < g <= 1:
                raise ValidationError("model.gamma must lie in (0, 1]")
            known = {f.name for f in fields(TrainConfig)}
            bad = set(self.training) - known
            if bad:
                raise ValidationError(f"unknown training fields {sorted(bad)}")
        self.solver = {"tol": 1e-8, "max_iter": 100_000, **self.solver}
        self.evaluation = {"N": 100_000, "ci_level": 0.99, "agreement_N": 10_000,
                           "agreement_eps": 1e-3, **self.evaluation}
        if int(self.evaluation["N"]) < 0:
            raise ValidationError("evaluation.N must be >= 0 (0 skips test error)")
        if not 0 < float(self.evaluation["ci_level"]) < 1:
            raise ValidationError("evaluation.ci_level must lie in (0, 1)")
        self.bounds = {"c_prime": 1.0, "delta": 0.1, "C": 2.0, "gap": None, **self.bounds}
        if not 0 < float(self.bounds["delta"]) < 0.5 or not float(self.bounds["C"]) > 1:
            raise ValidationError("bounds.delta must lie in (0, 1/2) and bounds.C must exceed 1")
        if self.distribution["family"].startswith("clust") and self.bounds["gap"] is None:
            raise ValidationError("cluster experiments need an explicit bounds.gap")
        self.output = {"dir": None, "format": "csv", **self.output}
        if self.output["format"] not in ("csv", "json"):
            raise ValidationError("output.format must be csv or json")
        if int(self.workers) < 1:
            raise ValidationError("workers must be >= 1")
        build_spec(self.distribution)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        bad = set(obj) - known
        if bad:
            raise ValidationError(f"unknown config keys {sorted(bad)}")
        if "distribution" not in obj or "n" not in obj or "seeds" not in obj:
            raise ValidationError("config needs distribution, n and seeds")
        return cls(**copy.deepcopy(obj))

    def to_dict(self) -> dict:
        return copy.deepcopy(asdict(self))

    @property
    def model_type(self) -> str:
        return self.model["type"]


def load_config(path) -> ExperimentConfig:
    """Read a YAML or JSON config file (JSON is a subset of YAML)."""
    try:
        obj = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ValidationError("config must be a mapping")
    return ExperimentConfig.from_dict(obj)


def build_spec(dist: dict) -> Optional[DistributionSpec]:
    """Distribution spec for a config block; None for ``family: file``."""
    fam = dist.get("family")
    try:
        if fam == "sg_gaussian":
            return SgSpec.gaussian_family(int(dist["d"]), float(dist["rho"]), float(dist["eta"]))
        if fam == "sg":
            return SgSpec(np.asarray(dist["lam"], float), float(dist["eta"]),
                          dist.get("base_dist", "gaussian"), dist.get("beta"))
        if fam == "clust_orthogonal":
            d = int(dist["d"])
            if "norm" in dist:
                norm = float(dist["norm"])
            else:
                norm = float(d) ** float(dist["norm_exponent"])
            spec = ClustSpec.orthogonal(d, int(dist["k"]), norm, float(dist["eta"]),
                                        dist.get("labels"))
            if "base_dist" in dist or "noise_scale" in dist:
                spec = ClustSpec(spec.means, spec.cluster_labels, spec.eta,
                                 dist.get("base_dist", "gaussian"), float(dist.get("noise_scale", 1.0)))
            return spec
        if fam == "clust":
            return ClustSpec(np.asarray(dist["means"], float), dist["cluster_labels"], float(dist["eta"]),
                             dist.get("base_dist", "gaussian"), float(dist.get("noise_scale", 1.0)))
        if fam == "opp":
            mu = np.zeros(int(dist["d"]))
            mu[0] = float(dist["mu_norm"])
            return OppSpec(mu, float(dist["eta"]))
        if fam == "file":
            if "path" not in dist:
                raise ValidationError("family 'file' needs a path")
            return None
    except KeyError as exc:
        raise ValidationError(f"distribution family {fam!r} is missing {exc}") from exc
    raise ValidationError(f"unknown distribution family {fam!r}")


# -- per-seed pipeline -----------------------------------------------------

@dataclass
class RunRecord:
    """One seed's outcome.  Fields not applicable to the model stay None."""

    seed: int
    model: str
    status: str = "ok"
    message: str = ""
    n: Optional[int] = None
    d: Optional[int] = None
    eta: Optional[float] = None
    r_min_sq: Optional[float] = None
    r_max_sq: Optional[float] = None
    r_sq: Optional[float] = None
    zeta: Optional[float] = None
    p_star: Optional[float] = None          # inf when the data are exactly orthogonal
    assumptions_satisfied: Optional[bool] = None
    train_error: Optional[float] = None
    interpolates: Optional[bool] = None
    tau: Optional[float] = None
    tau_bound: Optional[float] = None
    lam_min: Optional[float] = None
    lam_max: Optional[float] = None
    lam_lower_bound: Optional[float] = None
    lam_upper_bound: Optional[float] = None
    lam_in_bounds: Optional[bool] = None
    kkt_passes: Optional[bool] = None
    test_error: Optional[float] = None
    test_ci_low: Optional[float] = None
    test_ci_high: Optional[float] = None
    test_error_exact: Optional[float] = None
    bound_value: Optional[float] = None
    bound_formula: Optional[str] = None
    noise_tolerated: Optional[bool] = None
    train_steps: Optional[int] = None
    stationarity_residual: Optional[float] = None
    kink_count: Optional[int] = None
    boundary_agreement: Optional[float] = None
    agreement_used: Optional[int] = None
    solver_iterations: Optional[int] = None
    dual_objective: Optional[float] = None
    wall_clock: float = 0.0
    lam: Optional[list] = field(default=None, repr=False)

    def row(self) -> dict:
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return {c: d[c] for c in columns_for(self.model)}

    def to_dict(self) -> dict:
        out = asdict(self)
        out["schema_version"] = SCHEMA_VERSION
        return out


def _in_bounds(lam: np.ndarray, lo: float, hi: float, rel: float = 1e-9) -> bool:
    return bool(np.all(lam >= lo * (1 - rel)) and np.all(lam <= hi * (1 + rel)))


def _record_bounds(rec: RunRecord, spec, data: Dataset, lam: np.ndarray, tau: Optional[float],
                   cfg: ExperimentConfig):
    b = cfg.bounds
    if isinstance(spec, SgSpec):
        bv = bnd.sg_test_bound(spec.lam, spec.eta, float(b["c_prime"]))
        if tau is not None and b["gap"] is not None:
            rec.noise_tolerated = bnd.sg_noise_tolerated(spec.eta, tau, float(b["gap"]))
    elif isinstance(spec, ClustSpec):
        bv = bnd.clust_test_bound(spec.means, data.n, spec.k, spec.d, spec.eta, float(b["c_prime"]))
        if tau is not None:
            rec.noise_tolerated = bnd.clust_noise_tolerated(spec.eta, tau, float(b["gap"]))
    else:
        return
    rec.bound_value, rec.bound_formula = bv.value, bv.formula_id


def _run_linear(rec: RunRecord, data: Dataset, profile, cfg: ExperimentConfig):
    sol = solve_max_margin(data, tol=float(cfg.solver["tol"]), max_iter=int(cfg.solver["max_iter"]))
    rep = verify_linear_kkt(sol, data)
    rec.solver_iterations, rec.dual_objective = sol.iterations, sol.objective
    rec.kkt_passes = rep.passes
    lam = sol.lam
    rec.lam, rec.lam_min, rec.lam_max = lam.tolist(), float(lam.min()), float(lam.max())
    rec.tau = uniformity_ratio(lam) if np.all(lam > 0) else None
    p = profile.p_star_value
    if p >= 3 and p * profile.r_sq > 2:
        p_use = min(p, 1e300)
        lo, hi = lambda_bounds_linear(profile, p_use)
        rec.lam_lower_bound, rec.lam_upper_bound = lo, hi
        rec.lam_in_bounds = _in_bounds(lam, lo, hi)
        rec.tau_bound = tau_bound_linear(p_use, profile.r_sq)
    return sol.w, lam, rec.tau


def _run_net(rec: RunRecord, data: Dataset, profile, cfg: ExperimentConfig, spec):
    m, gamma, scale = int(cfg.model["m"]), float(cfg.model["gamma"]), float(cfg.model["scale"])
    params = init_network(m, data.d, gamma, scale, data.seed)
    trained, trace = train_to_margin(params, data, TrainConfig(**cfg.training))
    rec.train_steps = trace.steps[-1]
    unit = rescale_to_unit_margin(trained, data)
    cert = extract_net_kkt(unit, data)
    rec.kkt_passes, rec.stationarity_residual = cert.passes, cert.stationarity_residual
    rec.kink_count = cert.kink_count
    lam = cert.lam
    rec.lam, rec.lam_min, rec.lam_max = lam.tolist(), float(lam.min()), float(lam.max())
    rec.tau = cert.tau
    p = profile.p_star_value
    if p >= 3 / gamma**3 and gamma * p * profile.r_sq > 2:
        p_use = min(p, 1e300)
        lo, hi = lambda_bounds_leaky(profile, gamma, p_use)
        rec.lam_lower_bound, rec.lam_upper_bound = lo, hi
        rec.lam_in_bounds = _in_bounds(lam, lo, hi)
        rec.tau_bound = tau_bound_leaky(p_use, profile.r_sq, gamma)
    if cert.passes and np.any(lam > 0):
        z = effective_linear_direction(lam, data, gamma)
        agr = boundary_agreement(unit, z, probes=spec, N=int(cfg.evaluation["agreement_N"]),
                                 seed=derive_seed(data.seed, STREAMS["probes"]),
                                 eps=float(cfg.evaluation["agreement_eps"]))
        rec.boundary_agreement, rec.agreement_used = agr.fraction, agr.n_used
    return unit, lam, rec.tau


def run_seed(cfg: ExperimentConfig, seed: int) -> RunRecord:
    """Generate, profile, fit, certify and evaluate one seed; failures become the record status."""
    t0 = time.perf_counter()
    rec = RunRecord(seed=seed, model=cfg.model_type)
    spec = build_spec(cfg.distribution)
    try:
        if spec is None:
            data = load_dataset(cfg.distribution["path"])
            spec = data.spec
        else:
            data = sample(spec, cfg.n, seed)
        rec.n, rec.d = data.n, data.d
        rec.eta = None if spec is None else float(spec.eta)
        if data.n >= 2:
            prof = orthogonality_profile(data)
            rec.r_min_sq, rec.r_max_sq, rec.r_sq = prof.r_min_sq, prof.r_max_sq, prof.r_sq
            rec.zeta, rec.p_star = prof.zeta, prof.p_star_value
        else:
            prof = None
        delta, C = float(cfg.bounds["delta"]), float(cfg.bounds["C"])
        if isinstance(spec, SgSpec):
            rec.assumptions_satisfied = sg_assumption_report(spec, data.n, delta, C).all_satisfied
        elif isinstance(spec, ClustSpec):
            rec.assumptions_satisfied = clust_assumption_report(spec, data.n, delta, C).all_satisfied

        if prof is None:
            raise ValidationError("the pipeline needs at least two examples")
        if cfg.model_type == "linear":
            pred, lam, tau = _run_linear(rec, data, prof, cfg)
        else:
            pred, lam, tau = _run_net(rec, data, prof, cfg, spec)

        rec.interpolates = interpolation_check(pred, data)[0]
        rec.train_error = train_error(pred, data).point_estimate
        _record_bounds(rec, spec, data, lam, tau, cfg)
        N = int(cfg.evaluation["N"])
        if spec is not None and N > 0:
            est = test_error_mc(pred, spec, N, derive_seed(seed, STREAMS["test"]),
                                float(cfg.evaluation["ci_level"]))
            rec.test_error, rec.test_ci_low, rec.test_ci_high = (
                est.point_estimate, est.ci_low, est.ci_high)
        if (cfg.model_type == "linear" and isinstance(spec, SgSpec)
                and spec.base_dist == "gaussian"):
            rec.test_error_exact = test_error_exact_sg_gaussian(pred, spec).point_estimate
    except InfeasibleError as exc:
        rec.status, rec.message = "infeasible", str(exc)
    except TrainingFailure as exc:
        rec.status, rec.message = "training_failure", str(exc)
    except ValidationError as exc:
        rec.status, rec.message = "invalid", str(exc)
    rec.wall_clock = time.perf_counter() - t0
    return rec


def _run_seed_packed(args):
    cfg_dict, seed = args
    return run_seed(ExperimentConfig.from_dict(cfg_dict), seed)


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> list[RunRecord]:
    """Run every seed (in parallel across seeds if ``cfg.workers > 1``) and emit reports.

    Records come back in seed-list order whatever the worker count.  When an
    output directory is given (argument or ``cfg.output['dir']``) the records
    and the effective config are written there.
    """
    out_dir = out_dir if out_dir is not None else cfg.output.get("dir")
    if out_dir is not None:
        out_dir = _prepare_dir(out_dir)
    if cfg.workers > 1 and len(cfg.seeds) > 1:
        jobs = [(cfg.to_dict(), s) for s in cfg.seeds]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_run_seed_packed, jobs))
    else:
        records = [run_seed(cfg, s) for s in cfg.seeds]
    if out_dir is not None:
        write_records(records, out_dir, cfg.output["format"], cfg)
    return records


# -- reporting -------------------------------------------------------------

def _prepare_dir(path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ValidationError(f"output directory {path} is not writable: {exc}") from exc
    return path


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def records_to_csv(records: list[RunRecord]) -> str:
    if not records:
        raise ValidationError("no records to write")
    model = records[0].model
    cols = columns_for(model)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        row = r.row()
        w.writerow([_cell(row[c]) for c in cols])
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_safe(v) for v in obj]
    return obj


def write_records(records: list[RunRecord], out_dir, fmt: str = "csv",
                  cfg: Optional[ExperimentConfig] = None) -> Path:
    """Write ``records.csv`` or ``records.json`` plus the effective ``config.yaml``."""
    out_dir = _prepare_dir(out_dir)
    if cfg is not None:
        (out_dir / "config.yaml").write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True))
    if fmt == "csv":
        path = out_dir / "records.csv"
        path.write_text(records_to_csv(records))
    elif fmt == "json":
        path = out_dir / "records.json"
        payload = {"schema_version": SCHEMA_VERSION,
                   "config": None if cfg is None else cfg.to_dict(),
                   "records": [r.to_dict() for r in records]}
        path.write_text(json.dumps(_json_safe(payload), indent=1))
    else:
        raise ValidationError(f"unknown format {fmt!r}")
    return path


# -- sweeps ----------------------------------------------------------------

SUMMARY_COLUMNS = ["schema_version", "axis", "value", "n_runs", "n_ok", "interpolation_rate",
                   "mean_test_error", "ci_low", "ci_high", "mean_tau", "mean_bound_value"]


def _resolve_axis(cfg_dict: dict, axis: str) -> tuple[dict, str]:
    """Container dict and key for ``axis`` (dotted path or a bare unique field name)."""
    if "." in axis:
        *parents, key = axis.split(".")
        node = cfg_dict
        for p in parents:
            node = node.get(p) if isinstance(node, dict) else None
            if node is None:
                raise ValidationError(f"unknown axis {axis!r}")
        if not isinstance(node, dict) or key not in node:
            raise ValidationError(f"unknown axis {axis!r}")
        holder = node
    else:
        key = axis
        hits = [cfg_dict] if axis in cfg_dict else []
        hits += [v for v in cfg_dict.values() if isinstance(v, dict) and axis in v]
        if len(hits) != 1:
            raise ValidationError(f"unknown or ambiguous axis {axis!r}")
        holder = hits[0]
    val = holder[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ValidationError(f"axis {axis!r} is not a numeric field")
    return holder, key


def _summarize(axis: str, value, records: list[RunRecord], level: float) -> dict:
    ok = [r for r in records if r.status == "ok"]
    errs = np.array([r.test_error for r in ok if r.test_error is not None], dtype=float)
    row = {"schema_version": SCHEMA_VERSION, "axis": axis, "value": value,
           "n_runs": len(records), "n_ok": len(ok),
           "interpolation_rate": (float(np.mean([bool(r.interpolates) for r in ok])) if ok else None),
           "mean_test_error": None, "ci_low": None, "ci_high": None,
           "mean_tau": None, "mean_bound_value": None}
    if errs.size:
        mean = float(errs.mean())
        row["mean_test_error"] = mean
        if errs.size >= 2:
            # t interval across seeds
            half = float(stats.t.ppf(0.5 + level / 2, errs.size - 1) * errs.std(ddof=1) / math.sqrt(errs.size))
            row["ci_low"], row["ci_high"] = max(0.0, mean - half), min(1.0, mean + half)
        else:
            row["ci_low"], row["ci_high"] = ok[0].test_ci_low, ok[0].test_ci_high
    taus = [r.tau for r in ok if r.tau is not None]
    if taus:
        row["mean_tau"] = float(np.mean(taus))
    bvals = [r.bound_value for r in ok if r.bound_value is not None]
    if bvals:
        row["mean_bound_value"] = float(np.mean(bvals))
    return row


def sweep(cfg: ExperimentConfig, axis: str, values: list, out_dir=None):
    """One ``run_experiment`` per axis value.

    Returns ``(summary_rows, records_by_value)``; the summary carries the mean
    test error across seeds with a t interval at the config's CI level.
    """
    if not values:
        raise ValidationError("sweep needs at least one value")
    base = cfg.to_dict()
    _resolve_axis(base, axis)
    summary, all_records = [], {}
    for v in values:
        variant = copy.deepcopy(base)
        holder, key = _resolve_axis(variant, axis)
        holder[key] = type(holder[key])(v) if isinstance(holder[key], int) and float(v).is_integer() else v
        sub_cfg = ExperimentConfig.from_dict(variant)
        records = run_experiment(sub_cfg, out_dir=None)
        all_records[v] = records
        summary.append(_summarize(axis, v, records, float(sub_cfg.evaluation["ci_level"])))
    out_dir = out_dir if out_dir is not None else cfg.output.get("dir")
    if out_dir is not None:
        out_dir = _prepare_dir(out_dir)
        (out_dir / "sweep.csv").write_text(summary_to_csv(summary))
        (out_dir / "config.yaml").write_text(
            yaml.safe_dump({"base": base, "axis": axis, "values": list(values)}, sort_keys=True))
        for v, recs in all_records.items():
            (out_dir / f"records_{axis}_{v}.csv").write_text(records_to_csv(recs))
    return summary, all_records


def summary_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        w.writerow([_cell(r[c]) for c in SUMMARY_COLUMNS])
    return buf.getvalue()
