import json

import pytest
import yaml

from uqtab.config import load_run_config
from uqtab.core.errors import StageDependencyMissing
from uqtab.main import main
from uqtab.modules.bayes.priors import parse_prior
from uqtab.modules.models.families.base import ClassifierFamily
from uqtab.modules.pipeline.context import FULL, REDUCED, RunContext
from uqtab.modules.pipeline.services import (
    REFERENCE_BEST_MODEL,
    bnn_id,
    classical_id,
    parse_model_id,
    provenance,
    run_pipeline,
    select_best_model,
    stage_baseline,
    stage_bnn,
    stage_select,
    stage_shap,
    stage_stats,
)


class TestModelIds:
    def test_round_trip(self):
        assert parse_model_id(classical_id(ClassifierFamily.LOGISTIC, REDUCED)) == {
            "kind": "classical", "family": ClassifierFamily.LOGISTIC, "feature_set": REDUCED,
        }
        parsed = parse_model_id(bnn_id(parse_prior("normal:0:10"), REDUCED))
        assert parsed["kind"] == "bnn"
        assert parsed["prior"] == parse_prior("normal:0:10")
        assert bnn_id(parse_prior("normal:0:10"), REDUCED) == REFERENCE_BEST_MODEL

    @pytest.mark.parametrize("model_id", ["LOGISTIC", "FOREST:full", "bnn:gamma:0:1:full", "LOGISTIC:half"])
    def test_rejects_malformed(self, model_id):
        with pytest.raises(ValueError):
            parse_model_id(model_id)


class TestSelectBestModel:
    def test_ties_prefer_fewer_parameters_then_order(self):
        candidates = [
            {"model_id": "a", "accuracy": 0.9, "n_parameters": 50},
            {"model_id": "b", "accuracy": 0.9, "n_parameters": 10},
            {"model_id": "c", "accuracy": 0.9, "n_parameters": 10},
            {"model_id": "d", "accuracy": 0.8, "n_parameters": 1},
        ]
        assert select_best_model(candidates)["model_id"] == "b"

    def test_empty(self):
        with pytest.raises(StageDependencyMissing):
            select_best_model([])


class TestStages:
    def test_stats(self, run_config):
        ctx = RunContext(run_config)
        payload = stage_stats(ctx)
        assert payload["n"] == 120
        assert ctx.store.exists("stats.json")
        assert (ctx.store.plots_dir / "age_histogram.svg").exists()

    def test_baseline_full(self, run_config):
        ctx = RunContext(run_config)
        payload = stage_baseline(ctx, FULL)
        assert set(payload["families"]) == {"LOGISTIC", "NAIVE_BAYES", "DECISION_TREE"}
        for outcome in payload["families"].values():
            selected = outcome["selected"]
            assert 0.0 <= selected["metrics"]["accuracy"] <= 1.0
            assert sum(entry["highest_across_validation"] for entry in outcome["per_folds"]) == 1
        assert ctx.store.exists("split.json")
        assert ctx.store.exists("cv_table_full.csv")
        assert ctx.store.exists("cv_table.csv")
        assert (ctx.store.plots_dir / "confusion_classical_full.svg").exists()

    def test_reduced_needs_select(self, run_config):
        with pytest.raises(StageDependencyMissing):
            stage_baseline(RunContext(run_config), REDUCED)

    def test_shap_needs_an_evaluated_model(self, run_config):
        with pytest.raises(StageDependencyMissing):
            stage_shap(RunContext(run_config))

    def test_select_writes_decision(self, run_config):
        ctx = RunContext(run_config)
        payload = stage_select(ctx)
        names = set(payload["confirmed"]) | set(payload["rejected"]) | set(payload["tentative"])
        assert names == set(ctx.data.full.feature_names)
        assert "Response" in payload["confirmed"]
        assert ctx.view(REDUCED).feature_names == tuple(
            name for name in ctx.data.full.feature_names if name in payload["confirmed"]
        )

    def test_bnn_with_prior_subset(self, run_config):
        ctx = RunContext(run_config)
        payload = stage_bnn(ctx, FULL, priors=["normal:0:1"])
        (entry,) = payload["priors"]
        assert entry["model_id"] == "bnn:normal:0:1:full"
        assert entry["uncertainty_identity_gap"] <= 1e-12
        assert entry["n_parameters"] == 5 * len(payload["feature_names"]) + 11
        assert ctx.store.exists("posterior_normal-0-1_full.csv")
        for kind in ("epistemic", "aleatoric"):
            assert (ctx.store.plots_dir / f"uncertainty_{kind}_normal-0-1_full.svg").exists()

    def test_shap_on_classical_target(self, run_config):
        ctx = RunContext(run_config)
        stage_baseline(ctx, FULL)
        payload = stage_shap(ctx, "LOGISTIC:full")
        assert payload["target"] == "LOGISTIC:full"
        assert [e["row"] for e in payload["explanations"]] == [0, 1, 2, 3]
        assert payload["max_efficiency_gap"] <= 1e-9
        assert (ctx.store.plots_dir / "shap_waterfall.svg").exists()

    def test_provenance(self, run_config):
        canonical = provenance(RunContext(run_config))
        assert "timestamp" not in canonical and "host" not in canonical
        assert canonical["config_hash"] == run_config.config_hash()
        stamped = provenance(RunContext(run_config.model_copy(update={"canonical": False})))
        assert {"timestamp", "host"} <= set(stamped)

    def test_zero_workers_means_one_per_core(self, run_config):
        assert RunContext(run_config).workers == 1
        assert RunContext(run_config.model_copy(update={"workers": 0})).workers >= 1


class TestPipeline:
    def test_run_pipeline(self, run_config):
        ctx = RunContext(run_config)
        report = run_pipeline(ctx)
        best = report.best_model
        assert best is not None
        assert report.shap["target"] == best["model_id"]
        assert report.best_matches_reference == (best["model_id"] == REFERENCE_BEST_MODEL)
        assert set(report.baselines) == {FULL, REDUCED}
        assert set(report.bnn) == {FULL, REDUCED}
        assert ctx.store.exists("report.json")
        for chart in ("accuracy_comparison.svg", "shap_bar.svg", "shap_beeswarm.svg", "boruta_importance.svg"):
            assert (ctx.store.plots_dir / chart).exists()

    def test_bundled_sample_end_to_end(self, sample_overrides):
        ctx = RunContext(load_run_config(None, sample_overrides))
        report = run_pipeline(ctx)
        assert len(ctx.data.full.feature_names) == 16
        assert "Response" in ctx.view(REDUCED).feature_names
        assert report.best_model is not None
        assert report.shap["target"] == report.best_model["model_id"]
        (entry,) = report.bnn[FULL]["priors"]
        assert entry["n_parameters"] == 5 * 16 + 11
        assert ctx.store.exists("report.json")

    @pytest.mark.slow
    def test_canonical_runs_are_byte_identical(self, tmp_path, run_overrides):
        reports = []
        for name in ("first", "second"):
            config = load_run_config(None, {**run_overrides, "output_dir": str(tmp_path / name)})
            ctx = RunContext(config)
            run_pipeline(ctx)
            reports.append(ctx.store.path("report.json").read_bytes())
        assert reports[0] == reports[1]


class TestCli:
    def _config_file(self, tmp_path, overrides):
        path = tmp_path / "run.yaml"
        path.write_text(yaml.safe_dump(overrides), encoding="utf-8")
        return str(path)

    def test_config_schema(self, capsys):
        assert main(["config-schema"]) == 0
        schema = json.loads(capsys.readouterr().out)
        assert "seed" in schema["properties"]

    def test_stats_command(self, tmp_path, run_overrides):
        assert main(["stats", "--config", self._config_file(tmp_path, run_overrides)]) == 0
        assert (tmp_path / "out" / "stats.json").exists()

    def test_out_option_overrides_config(self, tmp_path, run_overrides):
        config = self._config_file(tmp_path, run_overrides)
        assert main(["stats", "--config", config, "--out", str(tmp_path / "elsewhere")]) == 0
        assert (tmp_path / "elsewhere" / "stats.json").exists()

    def test_missing_dataset_is_a_config_error(self, tmp_path, run_overrides):
        overrides = {**run_overrides, "dataset_path": str(tmp_path / "absent.csv")}
        assert main(["stats", "--config", self._config_file(tmp_path, overrides)]) == 2

    def test_bad_prior_is_a_config_error(self, tmp_path, run_overrides):
        config = self._config_file(tmp_path, run_overrides)
        assert main(["bnn", "--config", config, "--priors", "gamma:0:1"]) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["stats", "--config", str(tmp_path / "nope.yaml")]) == 2

    def test_unknown_option_is_a_usage_error(self):
        assert main(["stats", "--no-such-option"]) == 2

    def test_shap_before_any_stage_fails(self, tmp_path, run_overrides):
        assert main(["shap", "--config", self._config_file(tmp_path, run_overrides)]) == 3
