import io
import json

import numpy as np
import pytest

from excl.campaigns import (KnnModel, MovMaxModel, block_campaign, boundary_split_rate,
                            run_replicates, window_maxima)
from excl.cli import main
from excl.errors import ConfigurationError, DomainError
from excl.runner import (ExperimentConfig, ResultRecord, all_passed, emit_summary,
                         format_table, run_experiment)
from excl.scoring import KNN, Dirac

KNN1 = {"type": "knn", "k": 1, "d": 2}


def config(**kw):
    doc = {"kind": "theta", "model": KNN1, "seed": 3, "options": {"n_samples": 2000}}
    doc.update(kw)
    return ExperimentConfig.from_dict(doc)


class TestConfig:
    def test_roundtrip(self):
        cfg = config(tau=[20, 40])
        back = ExperimentConfig.from_json(cfg.to_json())
        assert back == cfg and back.tau == [20.0, 40.0]

    def test_scalar_tau(self):
        assert config(tau=30).tau == [30.0]

    def test_hash_ignores_run_fields(self):
        h = config().config_hash()
        assert config(seed=9, out="elsewhere", threads=4, dump=True).config_hash() == h
        assert config(epsilon=2.0).config_hash() != h
        assert len(h) == 16

    @pytest.mark.parametrize("field,value", [
        ("kind", "nope"), ("tau", [0.0]), ("replicates", 0), ("epsilon", -1.0),
        ("b_tau", 0.0), ("schema_version", 2), ("model", {"type": "knn", "d": 2}),
        ("model", {"type": "other"}),
    ])
    def test_invalid(self, field, value):
        with pytest.raises(ConfigurationError) as info:
            config(**{field: value})
        assert info.value.field.split(".")[0] == field

    def test_unknown_field(self):
        with pytest.raises(ConfigurationError):
            config(colour="red")

    def test_bad_json(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_json("{")
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_json("[]")


class TestCampaigns:
    def test_knn_model(self):
        m = KnnModel(2, 2)
        assert m.law.alpha == 4.0 and m.a_tau(10.0) > 0

    def test_movmax_kappa(self):
        assert MovMaxModel(KNN(2), Dirac(), 2.0, 2).kappa == 1.0

    def test_replicates_deterministic(self):
        a = window_maxima(KnnModel(1, 2), 10.0, 8, seed=5)
        b = window_maxima(KnnModel(1, 2), 10.0, 8, seed=5)
        np.testing.assert_array_equal(a.values, b.values)
        assert a.meta["a_tau"] == KnnModel(1, 2).a_tau(10.0)

    def test_threads_match_serial(self):
        a = window_maxima(KnnModel(1, 2), 10.0, 6, seed=5)
        b = window_maxima(KnnModel(1, 2), 10.0, 6, seed=5, threads=2)
        np.testing.assert_array_equal(a.values, b.values)

    def test_failed_replicates_counted(self):
        def fn(rng, flag):
            if rng.generator.random() < 0.5:
                raise DomainError("too few points")
            return flag
        res = run_replicates(fn, 40, 1, flag=1)
        assert 0 < res.n_failed < 40 and len(res.values) == 40 - res.n_failed

    def test_block_campaign(self):
        res = block_campaign(KnnModel(1, 2), 20.0, 4, seed=1)
        assert len(res.values) == 4
        assert res.meta["k_tau"] == res.meta["grid"].k_tau

    def test_split_rate_small(self):
        assert 0 < boundary_split_rate(KnnModel(1, 2), 80.0, 0.75) < 0.05


class TestRunExperiment:
    def test_theta_records(self):
        records, _ = run_experiment(config())
        by = {r.metric: r for r in records}
        assert {"theta_anchor_fm", "theta_anchor_fe", "anchor_difference",
                "theta_ratio"} <= set(by)
        assert by["theta_ratio"].value == pytest.approx(0.5)
        assert all(r.config_hash == records[0].config_hash for r in records)

    def test_deterministic_without_timing(self):
        a, _ = run_experiment(config())
        b, _ = run_experiment(config())
        assert [r.to_json(timing=False) for r in a] == [r.to_json(timing=False) for r in b]

    def test_seed_changes_values(self):
        a, _ = run_experiment(config())
        b, _ = run_experiment(config(seed=4))
        assert a[0].value != b[0].value

    def test_metric_bench(self):
        records, _ = run_experiment(config(kind="metric-bench", options={"pairs": 30}))
        assert all_passed(records)

    def test_limit_law_plot_data(self):
        records, plots = run_experiment(config(kind="limit-law", tau=[10.0], replicates=20))
        assert plots and all(np.asarray(v).shape[1] == 2 for v in plots.values())
        assert any(r.method == "gof" for r in records)


class TestOutput:
    records = [ResultRecord("e", "h", 1, "a", 0.5, 0.01, 10, passed=True),
               ResultRecord("e", "h", 1, "b", float("nan"), passed=None)]

    def test_table(self):
        lines = format_table(self.records).splitlines()
        assert lines[0].split() == ["metric", "value", "std_error", "n", "statistic", "passed"]
        assert lines[2].split()[1] == "nan" and lines[2].split()[-1] == "-"

    def test_files(self, tmp_path):
        out = io.StringIO()
        emit_summary(self.records, tmp_path, {"cdf": [[0.1, 0.2], [0.3, 0.4]]}, stream=out)
        assert (tmp_path / "summary.csv").read_text().startswith("metric,value")
        rows = [json.loads(x) for x in (tmp_path / "records.jsonl").read_text().splitlines()]
        assert rows[1]["value"] is None
        assert np.loadtxt(tmp_path / "cdf.dat").shape == (2, 2)
        assert "metric" in out.getvalue()

    def test_empty(self):
        with pytest.raises(ConfigurationError):
            emit_summary([])

    def test_all_passed(self):
        assert all_passed(self.records)
        assert not all_passed(self.records + [ResultRecord("e", "h", 1, "c", 0.0, passed=False)])


class TestCli:
    def write(self, tmp_path, doc):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        return str(path)

    def test_success(self, tmp_path, capsys):
        path = self.write(tmp_path, {"model": KNN1, "options": {"pairs": 10}})
        assert main(["metric-bench", "--config", path, "--out", str(tmp_path / "o")]) == 0
        assert (tmp_path / "o" / "summary.csv").exists()
        assert "metric" in capsys.readouterr().out

    def test_missing_file(self, tmp_path, capsys):
        assert main(["theta", "--config", str(tmp_path / "none.json")]) == 2
        assert "configuration error" in capsys.readouterr().err

    def test_kind_mismatch(self, tmp_path):
        path = self.write(tmp_path, {"kind": "theta", "model": KNN1})
        assert main(["metric-bench", "--config", path]) == 2

    def test_invalid_field(self, tmp_path):
        path = self.write(tmp_path, {"model": KNN1, "replicates": -3})
        assert main(["theta", "--config", path]) == 2

    def test_failed_check_exit_one(self, tmp_path):
        # Monte Carlo anchor estimates cannot meet a zero tolerance
        path = self.write(tmp_path, {"model": KNN1, "seed": 1,
                                     "options": {"n_samples": 500, "tolerance": 0.0}})
        assert main(["theta", "--config", path, "--out", str(tmp_path / "o")]) == 1

    def test_seed_override(self, tmp_path):
        path = self.write(tmp_path, {"model": KNN1, "options": {"n_samples": 500}})
        main(["theta", "--config", path, "--seed", "7", "--out", str(tmp_path / "o")])
        row = json.loads((tmp_path / "o" / "records.jsonl").read_text().splitlines()[0])
        assert row["seed"] == 7
