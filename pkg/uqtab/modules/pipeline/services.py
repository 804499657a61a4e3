"""
Logic for Pipeline module
One function per CLI stage; each reads what earlier stages persisted and
writes its own artifacts through the run's ArtifactStore
"""

import logging
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel

from uqtab import __version__
from uqtab.core.errors import AllDivergent, StageDependencyMissing, UqtabError
from uqtab.core.stage_manager import StageManager
from uqtab.core.system import get_host_info
from uqtab.modules.bayes.plots import render_uncertainty
from uqtab.modules.bayes.priors import PriorSpec, parse_prior, parse_prior_list
from uqtab.modules.bayes.services import (
    evaluate_bnn,
    load_posterior,
    nuts_config_for,
    posterior_name,
    posterior_predict,
    sample_bnn,
    save_posterior,
    summarize,
    thin,
    uncertainty,
)
from uqtab.modules.boruta.plots import render_importance_box
from uqtab.modules.boruta.services import BorutaConfig, boruta_select
from uqtab.modules.data.plots import render_age_histogram
from uqtab.modules.data.services import descriptive_stats, load_csv
from uqtab.modules.explain.plots import render_shap
from uqtab.modules.explain.services import explain_bnn, explain_model, explanations_to_dict, make_background
from uqtab.modules.models.families.base import ClassifierFamily, RandomForestParams, parse_hyperparams
from uqtab.modules.models.plots import render_accuracy_bars, render_confusion
from uqtab.modules.models.services import (
    CV_TABLE_COLUMNS,
    DEFAULT_GRIDS,
    CvCell,
    evaluate,
    fit,
    grid_search_cv,
    predict,
    refit_seed_for,
)
from uqtab.modules.pipeline.context import FEATURE_SETS, FULL, REDUCED, DataView, RunContext
from uqtab.modules.resample.services import SmoteConfig
from uqtab.shared.models import ConfusionMatrix

logger = logging.getLogger(__name__)

REFERENCE_BEST_MODEL = "bnn:normal:0:10:reduced"
FEATURE_SET_LABELS = {FULL: "Full features", REDUCED: "Boruta-selected"}


# ===== Model ids =====

def classical_id(family: ClassifierFamily, feature_set: str) -> str:
    return f"{ClassifierFamily(family).value}:{feature_set}"


def bnn_id(prior: PriorSpec, feature_set: str) -> str:
    return f"bnn:{prior.text}:{feature_set}"


def parse_model_id(model_id: str) -> Dict[str, Any]:
    """
    "LOGISTIC:reduced" or "bnn:normal:0:10:reduced"
    Raises:
        ValueError: On an unknown family, prior or feature set
    """
    head, _, feature_set = model_id.rpartition(":")
    if feature_set not in FEATURE_SETS or not head:
        raise ValueError(f"model id {model_id!r} must end with ':full' or ':reduced'")
    if head.lower().startswith("bnn:"):
        return {"kind": "bnn", "prior": parse_prior(head[4:]), "feature_set": feature_set}
    try:
        family = ClassifierFamily(head.upper())
    except ValueError as e:
        raise ValueError(f"unknown classifier family in {model_id!r}") from e
    return {"kind": "classical", "family": family, "feature_set": feature_set}


def select_best_model(candidates: Sequence[Dict[str, Any]]) -> Dict[str, Any]:
    """argmax test accuracy; ties to fewer parameters, then candidate order"""
    if not candidates:
        raise StageDependencyMissing("no evaluated model found; run 'uqtab baseline' or 'uqtab bnn' first")
    ranked = min(
        enumerate(candidates),
        key=lambda pair: (-pair[1]["accuracy"], pair[1]["n_parameters"], pair[0]),
    )
    return ranked[1]


# ===== stats =====

def stage_stats(ctx: RunContext) -> Dict[str, Any]:
    """Descriptive statistics and the age histogram"""
    table = load_csv(ctx.config.dataset_path, ctx.schema)
    report = descriptive_stats(table)
    payload = report.model_dump()
    ctx.store.write_json("stats.json", payload)
    ctx.store.write_svg("age_histogram.svg", render_age_histogram(report))
    logger.info(f"stats: {report.n} rows, target counts {report.target_counts}")
    return payload


# ===== baseline =====

def _model_entry(
    family: ClassifierFamily,
    cell: CvCell,
    model,
    refit_seed: int,
    view: DataView,
) -> Dict[str, Any]:
    _, X_test, _ = view.inputs(family)
    report = evaluate(predict(model, X_test), view.y_test)
    return {
        "model_id": classical_id(family, view.feature_set),
        "family": family.value,
        "grid_index": cell.grid_index,
        "hyperparams": cell.hp.model_dump(),
        "describe": cell.hp.describe(),
        "folds": cell.folds,
        "cv_accuracy": cell.mean_accuracy,
        "refit_seed": refit_seed,
        "n_parameters": model.n_parameters,
        "metrics": report.model_dump(),
    }


def _run_family(ctx: RunContext, family: ClassifierFamily, view: DataView, seed: int) -> Dict[str, Any]:
    config = ctx.config
    grid = config.model_grids.get(family) or DEFAULT_GRIDS[family]
    X_train, _, X_resampled = view.inputs(family)

    if config.paper_faithful_smote:
        result = grid_search_cv(
            family, grid, X_resampled, view.y_resampled, config.cv_folds, seed, workers=ctx.workers
        )
    else:
        smote_cfg = SmoteConfig(config.smote.k_neighbors, seed, config.smote.target_ratio)
        metric_scale = None if family.uses_scaled_inputs else view.metric_scale
        result = grid_search_cv(
            family, grid, X_train, view.y_train, config.cv_folds, seed,
            smote_cfg=smote_cfg,
            metric_scale=metric_scale,
            refit_data=(X_resampled, view.y_resampled),
            workers=ctx.workers,
        )

    selected = _model_entry(family, result.best, result.model, result.refit_seed, view)
    per_folds = []
    for folds in config.cv_folds:
        cell = result.best_for_folds(folds)
        if cell is None or not np.isfinite(cell.mean_accuracy):
            continue
        if cell.grid_index == result.best.grid_index:
            model, refit_seed = result.model, result.refit_seed
        else:
            refit_seed = refit_seed_for(seed, family, cell.grid_index)
            model = fit(family, cell.hp, X_resampled, view.y_resampled, refit_seed)
        per_folds.append(_model_entry(family, cell, model, refit_seed, view))

    if per_folds:
        top = min(range(len(per_folds)), key=lambda i: (-per_folds[i]["metrics"]["accuracy"], per_folds[i]["folds"]))
        for i, entry in enumerate(per_folds):
            entry["highest_across_validation"] = i == top

    rows = [{"feature_set": view.feature_set, **row} for row in result.table_rows()]
    return {"selected": selected, "per_folds": per_folds, "cv_rows": rows}


def _write_combined_cv_table(ctx: RunContext) -> None:
    """cv_table.csv = every cv_table_<featureset>.csv present, text copied verbatim"""
    frames = [
        pd.read_csv(ctx.store.path(f"cv_table_{fs}.csv"), dtype=str, keep_default_na=False)
        for fs in FEATURE_SETS
        if ctx.store.exists(f"cv_table_{fs}.csv")
    ]
    if not frames:
        return
    combined = pd.concat(frames, ignore_index=True)
    ctx.store.write_table("cv_table.csv", combined.to_dict(orient="records"), ["feature_set"] + CV_TABLE_COLUMNS)


def stage_baseline(ctx: RunContext, feature_set: str) -> Dict[str, Any]:
    """
    Grid-search CV and test evaluation of every configured family
    Writes baseline_<fs>.json, cv_table_<fs>.csv, cv_table.csv and the
    confusion heatmap of the best classical model
    """
    view = ctx.view(feature_set)
    seed = ctx.stage_seed("baseline", feature_set)
    ctx.store.write_json("split.json", ctx.data.split.to_dict())

    families: Dict[str, Any] = {}
    cv_rows: List[Dict[str, Any]] = []
    for family in ctx.config.families:
        family = ClassifierFamily(family)
        try:
            outcome = _run_family(ctx, family, view, seed)
        except UqtabError as e:
            logger.warning(f"baseline {feature_set}: {family.value} failed: {e}")
            families[family.value] = {"error": str(e)}
            continue
        cv_rows.extend(outcome.pop("cv_rows"))
        families[family.value] = outcome
        metrics = outcome["selected"]["metrics"]
        logger.info(f"baseline {feature_set}: {family.value} test accuracy {metrics['accuracy']:.4f}")

    payload = {
        "feature_set": feature_set,
        "feature_names": list(view.feature_names),
        "paper_faithful_smote": ctx.config.paper_faithful_smote,
        "families": families,
    }
    ctx.store.write_json(f"baseline_{feature_set}.json", payload)
    ctx.store.write_table(f"cv_table_{feature_set}.csv", cv_rows, ["feature_set"] + CV_TABLE_COLUMNS)
    _write_combined_cv_table(ctx)

    candidates = [f["selected"] for f in families.values() if "selected" in f]
    if candidates:
        best = select_best_model([
            {"accuracy": c["metrics"]["accuracy"], "n_parameters": c["n_parameters"], **c} for c in candidates
        ])
        cm = ConfusionMatrix(**best["metrics"]["confusion"])
        ctx.store.write_svg(
            f"confusion_classical_{feature_set}.svg",
            render_confusion(cm, f"{best['family']} ({FEATURE_SET_LABELS[feature_set]})", best["describe"]),
        )
    else:
        raise UqtabError(f"every classifier family failed on the {feature_set} feature set")
    return payload


# ===== select =====

def stage_select(ctx: RunContext) -> Dict[str, Any]:
    """Boruta on the resampled training partition (unscaled encodings)"""
    settings = ctx.config.boruta
    view = ctx.data.full
    cfg = BorutaConfig(
        max_iterations=settings.max_iterations,
        alpha=settings.alpha,
        forest_hp=RandomForestParams(n_trees=settings.n_trees, max_depth=settings.max_depth),
        seed=ctx.stage_seed("boruta"),
        importance=settings.importance,
        resolve_tentative=settings.resolve_tentative,
    )
    decision = boruta_select(view.X_resampled_raw, view.y_resampled, cfg, workers=ctx.workers)
    payload = {
        "decision": decision.model_dump(),
        "confirmed": decision.confirmed,
        "rejected": decision.rejected,
        "tentative": decision.tentative,
    }
    ctx.store.write_json("boruta.json", payload)
    ctx.store.write_svg("boruta_importance.svg", render_importance_box(decision))
    if not decision.confirmed:
        logger.warning("Boruta confirmed no feature; reduced-feature stages will fail")
    return payload


# ===== bnn =====

def stage_bnn(ctx: RunContext, feature_set: str, priors: Optional[Sequence[str]] = None) -> Dict[str, Any]:
    """
    Samples the network under every prior, evaluates it on the test split
    and draws the epistemic / aleatoric band charts
    """
    view = ctx.view(feature_set)
    settings = ctx.config.nuts
    band = ctx.config.uncertainty_band
    entries: List[Dict[str, Any]] = []
    failure: Optional[AllDivergent] = None

    for prior in parse_prior_list(priors or ctx.config.priors):
        cfg = nuts_config_for(prior, settings, ctx.stage_seed("bnn", prior.slug, feature_set))
        model_id = bnn_id(prior, feature_set)
        try:
            samples = sample_bnn(
                view.X_resampled_scaled, view.y_resampled, prior, cfg,
                hidden_units=settings.hidden_units,
                init_scale=settings.init_scale,
                workers=ctx.workers,
            )
        except AllDivergent as e:
            logger.warning(f"{model_id}: {e}")
            failure = e
            entries.append({"model_id": model_id, "prior": prior.text, "error": str(e), "diagnostics": e.diagnostics})
            continue

        name = posterior_name(prior, feature_set)
        save_posterior(ctx.store, name, samples)
        report = uncertainty(posterior_predict(samples, view.X_test_scaled))
        metrics = evaluate_bnn(samples, view.X_test_scaled, view.y_test)
        gap = np.abs(report.epistemic + report.aleatoric - report.mean * (1.0 - report.mean))

        entry = summarize(samples, metrics, report)
        entry.update({
            "model_id": model_id,
            "posterior": name,
            "uncertainty_series": report.to_dict(),
            "uncertainty_identity_gap": float(gap.max()),
        })
        entries.append(entry)
        for kind in ("epistemic", "aleatoric"):
            ctx.store.write_svg(
                f"uncertainty_{kind}_{prior.slug}_{feature_set}.svg",
                render_uncertainty(
                    report, kind,
                    f"{prior.label}, {FEATURE_SET_LABELS[feature_set]}: {kind} uncertainty",
                    band,
                    labels=view.y_test.labels,
                ),
            )
        logger.info(f"{model_id}: test accuracy {metrics.accuracy:.4f}")

    payload = {
        "feature_set": feature_set,
        "feature_names": list(view.feature_names),
        "band": band,
        "priors": entries,
    }
    ctx.store.write_json(f"bnn_{feature_set}.json", payload)

    evaluated = [e for e in entries if "metrics" in e]
    if not evaluated:
        raise failure or UqtabError("no prior was sampled")
    best = select_best_model([
        {"accuracy": e["metrics"]["accuracy"], **e} for e in evaluated
    ])
    ctx.store.write_svg(
        f"confusion_bnn_{feature_set}.svg",
        render_confusion(
            ConfusionMatrix(**best["metrics"]["confusion"]),
            f"BNN {best['label']} ({FEATURE_SET_LABELS[feature_set]})",
            "labels by posterior predictive mean > 0.5",
        ),
    )
    return payload


# ===== shap =====

def collect_candidates(ctx: RunContext) -> List[Dict[str, Any]]:
    """Every evaluated model found on disk, classical before BNN, full before reduced"""
    candidates = []
    for fs in FEATURE_SETS:
        if ctx.store.exists(f"baseline_{fs}.json"):
            for family, outcome in ctx.store.read_json(f"baseline_{fs}.json")["families"].items():
                if "selected" not in outcome:
                    continue
                selected = outcome["selected"]
                candidates.append({
                    "model_id": selected["model_id"],
                    "kind": "classical",
                    "accuracy": selected["metrics"]["accuracy"],
                    "n_parameters": selected["n_parameters"],
                    "metrics": selected["metrics"],
                })
    for fs in FEATURE_SETS:
        if ctx.store.exists(f"bnn_{fs}.json"):
            for entry in ctx.store.read_json(f"bnn_{fs}.json")["priors"]:
                if "metrics" not in entry:
                    continue
                candidates.append({
                    "model_id": entry["model_id"],
                    "kind": "bnn",
                    "accuracy": entry["metrics"]["accuracy"],
                    "n_parameters": entry["n_parameters"],
                    "metrics": entry["metrics"],
                })
    return candidates


def _explain_rows(instances, n_test: int) -> List[int]:
    if instances == "test":
        return list(range(n_test))
    rows = [int(i) for i in instances]
    bad = [i for i in rows if not 0 <= i < n_test]
    if bad or not rows:
        raise ValueError(f"instance indices {bad or rows} outside the {n_test}-row test set")
    return rows


def stage_shap(ctx: RunContext, target: Optional[str] = None) -> Dict[str, Any]:
    """
    Exact SHAP for the best model (or the requested one) on the test rows
    Background rows come from the un-resampled training partition
    """
    settings = ctx.config.shap
    model_id = target or settings.target
    if model_id is None:
        model_id = select_best_model(collect_candidates(ctx))["model_id"]
    parsed = parse_model_id(model_id)
    view = ctx.view(parsed["feature_set"])

    if parsed["kind"] == "bnn":
        name = posterior_name(parsed["prior"], parsed["feature_set"])
        samples = thin(load_posterior(ctx.store, name), settings.max_posterior_draws)
        X_train, X_test = view.X_train_scaled, view.X_test_scaled
    else:
        family = parsed["family"]
        baseline_name = f"baseline_{parsed['feature_set']}.json"
        outcome = ctx.store.read_json(baseline_name, "baseline")["families"].get(family.value, {})
        if "selected" not in outcome:
            raise StageDependencyMissing(f"{family.value} has no fitted configuration in {baseline_name}")
        selected = outcome["selected"]
        X_train, X_test, X_resampled = view.inputs(family)
        hp = parse_hyperparams(family, selected["hyperparams"])
        model = fit(family, hp, X_resampled, view.y_resampled, selected["refit_seed"])

    rows = _explain_rows(settings.instances, X_test.n)
    background = make_background(X_train, settings.background_size, ctx.stage_seed("shap", "background"))
    X_explain = X_test.take(rows)
    logger.info(f"shap: explaining {model_id} on {len(rows)} rows")
    if parsed["kind"] == "bnn":
        explanations = explain_bnn(samples, X_explain, background, workers=ctx.workers)
    else:
        explanations = explain_model(model, X_explain, background, workers=ctx.workers)

    payload = explanations_to_dict(explanations, model_id, background, rows)
    ctx.store.write_json("shap.json", payload)
    render_shap(
        explanations, ctx.store,
        waterfall_instance=settings.waterfall_instance,
        seed=ctx.stage_seed("shap"),
        subtitle=model_id,
    )
    top = ", ".join(f"{r['feature']} ({r['mean_abs_phi']:.3f})" for r in payload["ranking"][:3])
    logger.info(f"shap: top features {top}")
    return payload


# ===== report =====

class RunReport(BaseModel):
    """Consolidated results of a pipeline run"""

    provenance: Dict[str, Any]
    stats: Optional[Dict[str, Any]] = None
    baselines: Dict[str, Any] = {}
    boruta: Optional[Dict[str, Any]] = None
    bnn: Dict[str, Any] = {}
    shap: Optional[Dict[str, Any]] = None
    best_model: Optional[Dict[str, Any]] = None
    reference_best_model: str = REFERENCE_BEST_MODEL
    best_matches_reference: Optional[bool] = None


def provenance(ctx: RunContext) -> Dict[str, Any]:
    """Config hash, seed and version; timestamp and host unless canonical"""
    info: Dict[str, Any] = {
        "toolkit_version": __version__,
        "config_hash": ctx.config.config_hash(),
        "seed": ctx.config.seed,
        "paper_faithful_scaling": ctx.config.paper_faithful_scaling,
        "paper_faithful_smote": ctx.config.paper_faithful_smote,
    }
    if not ctx.config.canonical:
        info["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
        info["host"] = get_host_info()
    return info


def _accuracy_chart(report: RunReport) -> Optional[str]:
    groups: List[str] = []
    series: Dict[str, Dict[str, Optional[float]]] = {}
    for fs in FEATURE_SETS:
        label = FEATURE_SET_LABELS[fs]
        values: Dict[str, Optional[float]] = {}
        for family, outcome in report.baselines.get(fs, {}).get("families", {}).items():
            if "selected" in outcome:
                name = ClassifierFamily(family).short_name
                values[name] = outcome["selected"]["metrics"]["accuracy"]
                if name not in groups:
                    groups.append(name)
        for entry in report.bnn.get(fs, {}).get("priors", []):
            if "metrics" in entry:
                name = f"BNN {entry['label']}"
                values[name] = entry["metrics"]["accuracy"]
                if name not in groups:
                    groups.append(name)
        if values:
            series[label] = values
    if not groups:
        return None
    return render_accuracy_bars(groups, series, "Test accuracy before and after feature selection")


def stage_report(ctx: RunContext) -> RunReport:
    """Assembles report.json from the persisted stage outputs"""
    store = ctx.store
    report = RunReport(provenance=provenance(ctx))
    if store.exists("stats.json"):
        report.stats = store.read_json("stats.json")
    for fs in FEATURE_SETS:
        if store.exists(f"baseline_{fs}.json"):
            report.baselines[fs] = store.read_json(f"baseline_{fs}.json")
        if store.exists(f"bnn_{fs}.json"):
            report.bnn[fs] = store.read_json(f"bnn_{fs}.json")
    if store.exists("boruta.json"):
        boruta = store.read_json("boruta.json")
        report.boruta = {k: boruta[k] for k in ("confirmed", "rejected", "tentative")}
        report.boruta["hit_counts"] = boruta["decision"]["hit_counts"]
        report.boruta["iterations"] = boruta["decision"]["iterations"]
    if store.exists("shap.json"):
        shap = store.read_json("shap.json")
        report.shap = {k: shap[k] for k in ("target", "ranking", "background_size", "max_efficiency_gap")}

    candidates = collect_candidates(ctx)
    if candidates:
        best = select_best_model(candidates)
        report.best_model = {k: best[k] for k in ("model_id", "kind", "accuracy", "n_parameters", "metrics")}
        report.best_matches_reference = best["model_id"] == REFERENCE_BEST_MODEL
        if not report.best_matches_reference:
            logger.warning(f"best model is {best['model_id']}, reference is {REFERENCE_BEST_MODEL}")

    store.write_json("report.json", report.model_dump())
    chart = _accuracy_chart(report)
    if chart is not None:
        store.write_svg("accuracy_comparison.svg", chart)
    return report


# ===== pipeline =====

def run_pipeline(ctx: RunContext) -> RunReport:
    """
    stats -> baseline(full) -> select -> baseline(reduced) -> bnn(full)
    -> bnn(reduced) -> shap on the best model -> report
    Raises:
        StageFailure: Naming the stage that failed
    """
    manager = StageManager()
    manager.register_stage("stats", lambda results: stage_stats(ctx))
    manager.register_stage("baseline_full", lambda results: stage_baseline(ctx, FULL))
    manager.register_stage("select", lambda results: stage_select(ctx))
    manager.register_stage("baseline_reduced", lambda results: stage_baseline(ctx, REDUCED), requires=("select",))
    manager.register_stage("bnn_full", lambda results: stage_bnn(ctx, FULL))
    manager.register_stage("bnn_reduced", lambda results: stage_bnn(ctx, REDUCED), requires=("select",))
    manager.register_stage(
        "shap",
        lambda results: stage_shap(ctx),
        requires=("baseline_full", "baseline_reduced", "bnn_full", "bnn_reduced"),
    )
    manager.register_stage("report", lambda results: stage_report(ctx), requires=("stats", "shap"))
    manager.run_all()
    timings = ", ".join(f"{name} {seconds:.1f}s" for name, seconds in manager.timings.items())
    logger.info(f"Pipeline finished: {timings}")
    return manager.results["report"]
