"""Command-line entry point.

Exit codes: 0 success, 2 invalid input, 3 infeasible data or failed training.
Predictor files (linear solutions and networks) are always JSON; ``--format``
selects the layout of reports and datasets.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .data_gen import Dataset, load_dataset, sample, save_dataset
from .errors import InfeasibleError, TrainingFailure, ValidationError
from .evaluation import test_error_exact_sg_gaussian, test_error_mc
from .harness import (SCHEMA_VERSION, ExperimentConfig, _json_safe, build_spec, load_config,
                      run_experiment, summary_to_csv, sweep)
from .leaky_net import (NetworkParams, TrainConfig, extract_net_kkt, init_network,
                        rescale_to_unit_margin, train_to_margin)
from .linear_maxmargin import MarginSolution, solve_max_margin, verify_linear_kkt
from .rng import STREAMS, derive_seed

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 2, 3


def _config(args) -> ExperimentConfig:
    if args.config is None:
        raise ValidationError("--config is required")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seeds = [args.seed]
        cfg.validate()
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"cannot create {out}: {exc}") from exc
    return out


def _dataset(args) -> Dataset:
    if getattr(args, "data", None):
        return load_dataset(args.data)
    cfg = _config(args)
    spec = build_spec(cfg.distribution)
    if spec is None:
        return load_dataset(cfg.distribution["path"])
    return sample(spec, cfg.n, cfg.seeds[0])


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(_json_safe(obj), indent=1))
    return path


def _write_table(path: Path, header: list, rows: list) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["schema_version"] + header)
    for r in rows:
        w.writerow([SCHEMA_VERSION] + [repr(float(v)) if isinstance(v, (float, np.floating)) else v
                                       for v in r])
    path.write_text(buf.getvalue())
    return path


def _report(out: Path, name: str, fmt: str, obj: dict):
    """Scalar report as a one-row CSV or a JSON object."""
    if fmt == "json":
        return _write_json(out / f"{name}.json", {"schema_version": SCHEMA_VERSION, **obj})
    keys = [k for k, v in obj.items() if not isinstance(v, (list, dict))]
    return _write_table(out / f"{name}.csv", keys, [[obj[k] for k in keys]])


def _load_predictor(path):
    obj = json.loads(Path(path).read_text())
    if "W" in obj:
        return NetworkParams.from_dict(obj)
    if "w" in obj:
        return np.asarray(obj["w"], dtype=float)
    raise ValidationError(f"{path} is neither a linear solution nor a network")


# -- subcommands -----------------------------------------------------------

def cmd_gen(args) -> int:
    cfg = _config(args)
    spec = build_spec(cfg.distribution)
    if spec is None:
        raise ValidationError("gen needs a sampling distribution, not a file")
    out = _out_dir(args)
    for s in cfg.seeds:
        path = save_dataset(sample(spec, cfg.n, s), out / f"dataset_seed{s}.{args.format}")
        print(path)
    return EXIT_OK


def cmd_solve_linear(args) -> int:
    data = _dataset(args)
    sol = solve_max_margin(data)
    out = _out_dir(args)
    _write_json(out / "solution.json", sol.to_dict())
    rep = verify_linear_kkt(sol, data)
    if args.format == "csv":
        _write_table(out / "examples.csv", ["index", "y", "lambda", "margin"],
                     [[i, int(data.y_obs[i]), sol.lam[i], sol.margins[i]] for i in range(data.n)])
    _report(out, "summary", args.format,
            {"objective": sol.objective, "iterations": sol.iterations, **rep.to_dict()})
    return EXIT_OK


def cmd_train_net(args) -> int:
    data = _dataset(args)
    cfg = _config(args) if args.config else None
    model = cfg.model if cfg is not None and cfg.model_type == "leaky_net" else {}
    m, gamma = int(model.get("m", args.m)), float(model.get("gamma", args.gamma))
    scale = float(model.get("scale", args.scale))
    seed = args.seed if args.seed is not None else data.seed
    params = init_network(m, data.d, gamma, scale, seed)
    trained, trace = train_to_margin(params, data, TrainConfig(**(cfg.training if cfg else {})))
    unit = rescale_to_unit_margin(trained, data)
    out = _out_dir(args)
    _write_json(out / "network.json", unit.to_dict())
    if args.format == "csv":
        _write_table(out / "trace.csv", ["step", "log_risk", "norm_margin", "dir_cosine", "w_norm"],
                     list(zip(trace.steps, trace.log_risk, trace.norm_margin,
                              trace.dir_cosine, trace.w_norm)))
    else:
        _write_json(out / "trace.json", trace.to_dict())
    return EXIT_OK


def cmd_certify(args) -> int:
    data = _dataset(args)
    pred = _load_predictor(args.predictor)
    out = _out_dir(args)
    if isinstance(pred, NetworkParams):
        cert = extract_net_kkt(rescale_to_unit_margin(pred, data), data)
        rep = cert.to_dict()
        lam, passes = cert.lam, cert.passes
    else:
        obj = json.loads(Path(args.predictor).read_text())
        lam = np.asarray(obj.get("lambda", np.zeros(data.n)), dtype=float)
        sol = MarginSolution(pred, lam, data.y_obs * (data.X @ pred), float(pred @ pred), 0, True)
        rep = verify_linear_kkt(sol, data).to_dict()
        passes = rep["passes"]
    if args.format == "csv":
        _write_table(out / "multipliers.csv", ["index", "lambda"],
                     [[i, lam[i]] for i in range(data.n)])
    _report(out, "certificate", args.format, rep)
    return EXIT_OK if passes else EXIT_FAILED


def cmd_eval(args) -> int:
    cfg = _config(args)
    spec = build_spec(cfg.distribution)
    if spec is None:
        raise ValidationError("eval needs a sampling distribution")
    pred = _load_predictor(args.predictor)
    N = args.N if args.N is not None else int(cfg.evaluation["N"])
    est = test_error_mc(pred, spec, N, derive_seed(cfg.seeds[0], STREAMS["test"]),
                        float(cfg.evaluation["ci_level"]))
    rep = est.to_dict()
    if not isinstance(pred, NetworkParams) and getattr(spec, "kind", "") == "sg" \
            and spec.base_dist == "gaussian":
        rep["closed_form"] = test_error_exact_sg_gaussian(pred, spec).point_estimate
    _report(_out_dir(args), "test_error", args.format, rep)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    cfg.output["format"] = args.format
    records = run_experiment(cfg, out_dir=_out_dir(args))
    failed = [r for r in records if r.status in ("infeasible", "training_failure")]
    bad = [r for r in records if r.status == "invalid"]
    for r in records:
        print(f"seed {r.seed}: {r.status}" + (f" ({r.message})" if r.message else ""))
    if bad:
        return EXIT_INVALID
    return EXIT_FAILED if failed else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    values = []
    for tok in filter(None, args.values.split(",")):
        tok = tok.strip()
        try:
            values.append(int(tok) if tok.lstrip("-").isdigit() else float(tok))
        except ValueError as exc:
            raise ValidationError(f"bad sweep value {tok!r}") from exc
    out = _out_dir(args)
    summary, _ = sweep(cfg, args.axis, values, out_dir=out)
    if args.format == "json":
        _write_json(out / "sweep.json", {"schema_version": SCHEMA_VERSION, "rows": summary})
    sys.stdout.write(summary_to_csv(summary))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="benign-kkt", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON experiment config")
    common.add_argument("--seed", type=int, help="override the config's seed list with one seed")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="sample datasets")
    p.set_defaults(func=cmd_gen)
    p = sub.add_parser("solve-linear", parents=[common], help="max-margin linear classifier")
    p.add_argument("--data", help="saved dataset (otherwise sampled from --config)")
    p.set_defaults(func=cmd_solve_linear)
    p = sub.add_parser("train-net", parents=[common], help="train a leaky ReLU network")
    p.add_argument("--data")
    p.add_argument("--m", type=int, default=32)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--scale", type=float, default=1e-4)
    p.set_defaults(func=cmd_train_net)
    p = sub.add_parser("certify", parents=[common], help="KKT certificate for a predictor")
    p.add_argument("--data")
    p.add_argument("--predictor", required=True, help="solution.json or network.json")
    p.set_defaults(func=cmd_certify)
    p = sub.add_parser("eval", parents=[common], help="Monte Carlo test error")
    p.add_argument("--predictor", required=True)
    p.add_argument("--N", type=int)
    p.set_defaults(func=cmd_eval)
    p = sub.add_parser("run", parents=[common], help="run a full experiment")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", parents=[common], help="run an experiment per axis value")
    p.add_argument("--axis", required=True, help="config field, e.g. distribution.d or eta")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (InfeasibleError, TrainingFailure) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
