"""
Logic for Bayes module
Sampling the network posterior, posterior prediction, the epistemic /
aleatoric split of predictive variance, and persistence of sample sets
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Union

import numpy as np

from uqtab.core.artifacts import ArtifactStore
from uqtab.core.errors import DimMismatch
from uqtab.core.seeds import derive_seed, make_rng
from uqtab.modules.bayes.network import NetworkLayout, forward_draws
from uqtab.modules.bayes.nuts import ChainDiagnostics, NutsConfig, PosteriorSampleSet, nuts_sample
from uqtab.modules.bayes.posterior import BnnPosterior
from uqtab.modules.bayes.priors import PriorSpec, parse_prior
from uqtab.modules.data.services import EncodedMatrix, LabelVector
from uqtab.modules.models.metrics import evaluate
from uqtab.shared.models import MetricsReport

logger = logging.getLogger(__name__)

BAND_Z = {"sd": 1.0, "90": 1.645}


@dataclass(frozen=True)
class PredictiveDraws:
    """probs[s, i]: class-1 probability of instance i under posterior draw s"""

    probs: np.ndarray

    @property
    def n_draws(self) -> int:
        return int(self.probs.shape[0])

    @property
    def n_instances(self) -> int:
        return int(self.probs.shape[1])

    @property
    def mean(self) -> np.ndarray:
        return self.probs.mean(axis=0)


@dataclass(frozen=True)
class UncertaintyReport:
    """Per-instance predictive mean and its variance split"""

    mean: np.ndarray
    epistemic: np.ndarray
    aleatoric: np.ndarray

    def band(self, kind: str, width: str = "sd") -> np.ndarray:
        """Half-width of the shaded band: z * sqrt(variance), z = 1 or 1.645"""
        variance = self.epistemic if kind == "epistemic" else self.aleatoric
        return BAND_Z[width] * np.sqrt(variance)

    def to_dict(self) -> Dict[str, List[float]]:
        return {
            "mean": self.mean.tolist(),
            "epistemic": self.epistemic.tolist(),
            "aleatoric": self.aleatoric.tolist(),
        }


def nuts_config_for(prior: PriorSpec, settings: Any, seed: int) -> NutsConfig:
    """
    Sampler settings for one prior
    Cauchy and horseshoe posteriors use the heavy-tail acceptance target
    """
    target = settings.heavy_tail_target_accept if prior.heavy_tailed else settings.target_accept
    return NutsConfig(
        warmup=settings.warmup,
        draws=settings.draws,
        max_tree_depth=settings.max_tree_depth,
        target_accept=target,
        divergence_threshold=settings.divergence_threshold,
        seed=seed,
        chains=settings.chains,
    )


def initial_points(dim: int, chains: int, init_scale: float, seed: int) -> np.ndarray:
    """One N(0, init_scale) start per chain"""
    return np.vstack([
        make_rng(derive_seed(seed, "init", c)).normal(0.0, init_scale, size=dim) for c in range(chains)
    ])


def sample_bnn(
    X: EncodedMatrix,
    y: LabelVector,
    prior: PriorSpec,
    cfg: NutsConfig,
    hidden_units: int = 5,
    init_scale: float = 0.1,
    workers: int = 1,
) -> PosteriorSampleSet:
    """
    Draws from the network posterior under one prior
    Args:
        X: Training matrix (standardized)
        y: Training labels
        prior: Prior over every weight and bias
        cfg: Sampler settings
        hidden_units: Width of the hidden layer
        init_scale: Standard deviation of the per-chain start points
        workers: Thread pool size over chains
    Returns:
        PosteriorSampleSet in the sampled coordinates; meta records the
        layout so predictions can check dimensions
    Raises:
        AllDivergent: If more than half of the transitions diverged
    """
    layout = NetworkLayout(d=X.d, hidden=hidden_units)
    target = BnnPosterior(X.values, y.labels, prior, layout)
    inits = initial_points(target.dim, cfg.chains, init_scale, cfg.seed)
    logger.info(f"Sampling {prior.label}: dim {target.dim}, {cfg.chains} chains x {cfg.draws} draws")

    samples = nuts_sample(target, inits, cfg, workers=workers)
    samples.prior = prior
    samples.meta.update({
        "prior": prior.text,
        "feature_names": list(X.feature_names),
        "hidden_units": hidden_units,
        "seed": cfg.seed,
        "target_accept": cfg.target_accept,
    })
    logger.info(
        f"{prior.label}: {samples.total_divergences} divergences, "
        f"max split R-hat {samples.max_split_rhat if samples.max_split_rhat is not None else 'n/a'}"
    )
    return samples


def layout_of(samples: PosteriorSampleSet) -> NetworkLayout:
    return NetworkLayout(d=len(samples.meta["feature_names"]), hidden=int(samples.meta["hidden_units"]))


def network_weights(samples: PosteriorSampleSet) -> np.ndarray:
    """(S, n_weights) weights; horseshoe draws are reconstituted as z * exp(eta) * tau"""
    layout = layout_of(samples)
    prior = samples.prior
    if prior is not None and prior.is_horseshoe:
        p = layout.n_weights
        with np.errstate(over="ignore"):
            return samples.samples[:, :p] * np.exp(samples.samples[:, p:]) * prior.scale
    return samples.samples


def thin(samples: PosteriorSampleSet, max_draws: int) -> PosteriorSampleSet:
    """Keeps at most max_draws evenly spaced rows"""
    total = samples.samples.shape[0]
    if total <= max_draws:
        return samples
    rows = np.unique(np.linspace(0, total - 1, max_draws).round().astype(int))
    return PosteriorSampleSet(
        samples=samples.samples[rows],
        chains=1,
        draws=rows.size,
        diagnostics=samples.diagnostics,
        max_split_rhat=samples.max_split_rhat,
        prior=samples.prior,
        meta=dict(samples.meta),
    )


def posterior_predict(samples: PosteriorSampleSet, X: Union[EncodedMatrix, np.ndarray]) -> PredictiveDraws:
    """
    Class-1 probability of every row under every posterior draw
    Raises:
        DimMismatch: If X has a different feature count than the sampled network
    """
    layout = layout_of(samples)
    if isinstance(X, EncodedMatrix):
        names = list(samples.meta["feature_names"])
        if list(X.feature_names) != names:
            raise DimMismatch(f"posterior was sampled on {names}, got {list(X.feature_names)}")
        values = X.values
    else:
        values = np.asarray(X, dtype=float)
        if values.ndim == 1:
            values = values.reshape(1, -1)
    return PredictiveDraws(forward_draws(layout, network_weights(samples), values))


def uncertainty(draws: PredictiveDraws) -> UncertaintyReport:
    """
    epistemic = population variance of p over draws,
    aleatoric = mean of p(1 - p); they sum to mean(1 - mean)
    """
    if draws.n_draws < 2:
        raise ValueError("uncertainty needs at least 2 posterior draws")
    probs = draws.probs
    mean = probs.mean(axis=0)
    epistemic = probs.var(axis=0)
    aleatoric = np.mean(probs * (1.0 - probs), axis=0)
    return UncertaintyReport(mean=mean, epistemic=epistemic, aleatoric=aleatoric)


def evaluate_bnn(samples: PosteriorSampleSet, X_test: EncodedMatrix, y_test: LabelVector) -> MetricsReport:
    """Labels by posterior predictive mean > 0.5"""
    mean = posterior_predict(samples, X_test).mean
    return evaluate((mean > 0.5).astype(int), y_test)


# ===== Persistence =====

def posterior_name(prior: PriorSpec, feature_set: str) -> str:
    return f"posterior_{prior.slug}_{feature_set}"


def save_posterior(store: ArtifactStore, name: str, samples: PosteriorSampleSet) -> None:
    """Writes <name>.csv (samples, chain-major) and the <name>.json diagnostics sidecar"""
    layout = layout_of(samples)
    horseshoe = samples.prior is not None and samples.prior.is_horseshoe
    store.write_matrix(f"{name}.csv", samples.samples, layout.parameter_names(horseshoe))
    store.write_json(f"{name}.json", {
        **samples.diagnostics_dict(),
        "inv_metric": [d.inv_metric for d in samples.diagnostics],
    })


def load_posterior(store: ArtifactStore, name: str, stage: Optional[str] = "bnn") -> PosteriorSampleSet:
    """Reads a sample set written by save_posterior"""
    sidecar = store.read_json(f"{name}.json", stage)
    frame = store.read_matrix(f"{name}.csv", stage)
    inv_metrics = sidecar.get("inv_metric", [])
    diagnostics = [
        ChainDiagnostics(
            chain=entry["chain"],
            divergences=entry["divergences"],
            warmup_divergences=entry["warmup_divergences"],
            mean_accept_stat=entry["mean_accept_stat"],
            step_size=entry["step_size"],
            tree_depth_histogram={int(k): v for k, v in entry["tree_depth_histogram"].items()},
            n_leapfrog=entry["n_leapfrog"],
            inv_metric=inv_metrics[i] if i < len(inv_metrics) else [],
        )
        for i, entry in enumerate(sidecar["per_chain"])
    ]
    meta_keys = ("prior", "feature_names", "hidden_units", "seed", "target_accept")
    return PosteriorSampleSet(
        samples=frame.to_numpy(dtype=float),
        chains=sidecar["chains"],
        draws=sidecar["draws_per_chain"],
        diagnostics=diagnostics,
        max_split_rhat=sidecar.get("max_split_rhat"),
        prior=parse_prior(sidecar["prior"]),
        meta={k: sidecar[k] for k in meta_keys if k in sidecar},
    )


def n_parameters(samples: PosteriorSampleSet) -> int:
    """Sampled dimension: 5d + 11, doubled for the horseshoe"""
    return samples.dim


def summarize(samples: PosteriorSampleSet, metrics: MetricsReport, report: UncertaintyReport) -> Dict[str, Any]:
    """Per-prior entry of the bnn_<featureset>.json artifact"""
    return {
        "prior": samples.prior.text if samples.prior is not None else None,
        "label": samples.prior.label if samples.prior is not None else None,
        "metrics": metrics.model_dump(),
        "n_parameters": n_parameters(samples),
        "diagnostics": samples.diagnostics_dict(),
        "uncertainty": {
            "mean_epistemic": float(report.epistemic.mean()),
            "mean_aleatoric": float(report.aleatoric.mean()),
        },
    }


