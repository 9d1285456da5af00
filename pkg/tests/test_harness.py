import csv
import io
import json

import numpy as np
import pytest

from benign_kkt.data_gen import Dataset, save_dataset
from benign_kkt.errors import ValidationError
from benign_kkt.harness import (SCHEMA_VERSION, SUMMARY_COLUMNS, ExperimentConfig, columns_for,
                                load_config, records_to_csv, run_experiment, sweep)

SG = {"family": "sg_gaussian", "d": 400, "rho": 0.75, "eta": 0.1}


def cfg(**kw):
    base = {"distribution": dict(SG), "n": 10, "seeds": [0, 1, 2], "evaluation": {"N": 4000}}
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def strip_clock(text):
    return [{k: v for k, v in r.items() if k != "wall_clock"} for r in rows(text)]


class TestConfig:
    def test_defaults_filled(self):
        c = cfg()
        assert c.solver["tol"] == 1e-8 and c.evaluation["ci_level"] == 0.99
        assert c.bounds["c_prime"] == 1.0 and c.bounds["gap"] is None

    @pytest.mark.parametrize("bad", [
        {"seeds": []},
        {"n": 0},
        {"model": {"type": "forest"}},
        {"model": {"type": "leaky_net", "m": 3}},
        {"model": {"type": "leaky_net", "gamma": 0.0}},
        {"distribution": {"family": "nope"}},
        {"distribution": {"family": "sg_gaussian", "d": 10}},
        {"distribution": {"family": "sg_gaussian", "d": 10, "rho": 0.5, "eta": 0.7}},
        {"evaluation": {"ci_level": 1.5}},
        {"bounds": {"delta": 0.6}},
        {"training": {"learning_rate": 1.0}, "model": {"type": "leaky_net"}},
        {"seeds": [-1]},
    ])
    def test_invalid(self, bad):
        with pytest.raises(ValidationError):
            cfg(**bad)

    def test_unknown_key(self):
        with pytest.raises(ValidationError):
            ExperimentConfig.from_dict({"distribution": SG, "n": 5, "seeds": [0], "extra": 1})

    def test_cluster_needs_gap(self):
        dist = {"family": "clust_orthogonal", "d": 100, "k": 3, "norm_exponent": 1 / 3, "eta": 0.1}
        with pytest.raises(ValidationError):
            cfg(distribution=dist)
        assert cfg(distribution=dist, bounds={"gap": 0.05}).bounds["gap"] == 0.05

    def test_yaml_and_json_files(self, tmp_path):
        (tmp_path / "c.yaml").write_text("distribution: {family: opp, d: 50, mu_norm: 3, eta: 0.1}\n"
                                         "n: 8\nseeds: [4]\n")
        (tmp_path / "c.json").write_text(json.dumps({"distribution": SG, "n": 6, "seeds": [1]}))
        assert load_config(tmp_path / "c.yaml").distribution["mu_norm"] == 3
        assert load_config(tmp_path / "c.json").n == 6
        with pytest.raises(ValidationError):
            load_config(tmp_path / "missing.yaml")


class TestRunExperiment:
    def test_linear_records_deterministic(self):
        a, b = run_experiment(cfg()), run_experiment(cfg())
        assert len(a) == 3
        assert strip_clock(records_to_csv(a)) == strip_clock(records_to_csv(b))
        for r in a:
            assert r.status == "ok" and r.interpolates and r.train_error == 0.0
            assert r.test_error_exact is not None
            assert r.boundary_agreement is None

    def test_worker_count_does_not_matter(self):
        one = run_experiment(cfg())
        two = run_experiment(cfg(workers=2))
        assert strip_clock(records_to_csv(one)) == strip_clock(records_to_csv(two))

    def test_gaussian_regime_benign(self):
        c = cfg(distribution={"family": "sg_gaussian", "d": 4000, "rho": 0.75, "eta": 0.1},
                n=20, seeds=[0, 1, 2], evaluation={"N": 20_000})
        for r in run_experiment(c):
            assert r.interpolates and r.test_error <= 0.2

    def test_network_record_fields(self):
        c = cfg(model={"type": "leaky_net", "m": 8}, n=6, seeds=[0],
                evaluation={"N": 2000, "agreement_N": 500})
        (r,) = run_experiment(c)
        assert r.status == "ok" and r.kkt_passes
        assert r.boundary_agreement == 1.0
        assert r.solver_iterations is None
        assert list(rows(records_to_csv([r]))[0]) == columns_for("leaky_net")

    def test_infeasible_recorded(self, tmp_path):
        X = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        path = save_dataset(Dataset.from_arrays(X, [1, -1, 1]), tmp_path / "dup.npz")
        recs = run_experiment(cfg(distribution={"family": "file", "path": str(path)}, seeds=[0, 1]))
        assert [r.status for r in recs] == ["infeasible", "infeasible"]
        assert "separ" in recs[0].message
        assert recs[0].p_star is not None

    def test_training_failure_recorded(self, tmp_path):
        X = np.array([[1.0, 0.0], [1.0, 0.0]])
        path = save_dataset(Dataset.from_arrays(X, [1, -1]), tmp_path / "dup.npz")
        c = cfg(distribution={"family": "file", "path": str(path)}, seeds=[0],
                model={"type": "leaky_net", "m": 2}, training={"max_steps": 500})
        (r,) = run_experiment(c)
        assert r.status == "training_failure"

    def test_outputs_written(self, tmp_path):
        run_experiment(cfg(seeds=[0]), out_dir=tmp_path / "csv")
        text = (tmp_path / "csv" / "records.csv").read_text()
        header = text.splitlines()[0].split(",")
        assert header == columns_for("linear") and header[0] == "schema_version"
        assert rows(text)[0]["schema_version"] == str(SCHEMA_VERSION)
        assert load_config(tmp_path / "csv" / "config.yaml").seeds == [0]
        c = cfg(seeds=[0], output={"format": "json", "dir": str(tmp_path / "js")})
        run_experiment(c)
        payload = json.loads((tmp_path / "js" / "records.json").read_text())
        assert payload["config"]["n"] == 10 and len(payload["records"]) == 1

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(ValidationError):
            run_experiment(cfg(seeds=[0]), out_dir=blocker / "sub")

    def test_sandwich_columns_when_orthogonal(self):
        c = cfg(distribution={"family": "sg", "lam": [1.0] * 30_000, "eta": 0.1}, n=6, seeds=[0],
                evaluation={"N": 100})
        (r,) = run_experiment(c)
        assert r.p_star >= 3
        assert r.lam_in_bounds and r.tau <= r.tau_bound

    def test_cluster_and_opp_families(self):
        clust = cfg(distribution={"family": "clust_orthogonal", "d": 2000, "k": 3,
                                  "norm_exponent": 1 / 3, "eta": 0.1},
                    n=12, seeds=[0], bounds={"gap": 0.05})
        (r,) = run_experiment(clust)
        assert r.status == "ok" and r.bound_formula == "clust_tau_uniform"
        assert r.noise_tolerated is not None
        opp = cfg(distribution={"family": "opp", "d": 500, "mu_norm": 5, "eta": 0.1}, seeds=[0])
        (r,) = run_experiment(opp)
        assert r.status == "ok" and r.bound_value is None and r.test_error_exact is None


class TestSweep:
    def test_dimension_axis(self):
        base = cfg(n=20, seeds=[0, 1, 2], evaluation={"N": 20_000})
        summary, recs = sweep(base, "distribution.d", [500, 1000, 2000, 4000])
        assert [r["value"] for r in summary] == [500, 1000, 2000, 4000]
        assert all(len(v) == 3 for v in recs.values())
        for prev, nxt in zip(summary, summary[1:]):
            assert nxt["mean_test_error"] <= prev["ci_high"]

    def test_noise_axis(self):
        base = cfg(distribution={"family": "sg_gaussian", "d": 4000, "rho": 0.75, "eta": 0.1},
                   n=20, seeds=[0, 1], evaluation={"N": 20_000})
        summary, _ = sweep(base, "eta", [0.05, 0.1, 0.2])
        gaps = [r["mean_test_error"] - r["value"] for r in summary]
        assert all(g >= -0.01 for g in gaps)
        assert max(gaps) - min(gaps) < 0.06

    def test_errors(self):
        with pytest.raises(ValidationError):
            sweep(cfg(), "d", [])
        with pytest.raises(ValidationError):
            sweep(cfg(), "nope", [1])
        with pytest.raises(ValidationError):
            sweep(cfg(), "distribution.family", [1])

    def test_written(self, tmp_path):
        sweep(cfg(seeds=[0]), "n", [5, 6], out_dir=tmp_path)
        text = (tmp_path / "sweep.csv").read_text()
        assert text.splitlines()[0].split(",") == SUMMARY_COLUMNS
        assert (tmp_path / "records_n_5.csv").exists()
