"""
No-U-Turn Sampler
Slice-variable NUTS with recursive tree doubling, the generalized U-turn
criterion on summed momenta (with the cross-subtree checks), dual-averaging
step size adaptation and a diagonal mass matrix estimated over expanding
warmup windows
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from uqtab.core.errors import AllDivergent, NonFinite
from uqtab.core.seeds import derive_seed, make_rng
from uqtab.core.stage_manager import run_parallel

logger = logging.getLogger(__name__)

Target = Callable[[np.ndarray], Tuple[float, np.ndarray]]

# Dual averaging constants
GAMMA = 0.05
T0 = 10.0
KAPPA = 0.75

# Warmup windows: initial fast buffer, first slow window, terminal fast buffer
INIT_BUFFER = 75
BASE_WINDOW = 25
TERM_BUFFER = 50

MAX_DIVERGENT_FRACTION = 0.5


@dataclass(frozen=True)
class NutsConfig:
    warmup: int = 500
    draws: int = 1000
    max_tree_depth: int = 10
    target_accept: float = 0.8
    divergence_threshold: float = 1000.0
    seed: int = 0
    chains: int = 2

    def __post_init__(self):
        if self.warmup < 0 or self.draws < 1 or self.chains < 1 or self.max_tree_depth < 1:
            raise ValueError("warmup >= 0, draws >= 1, chains >= 1 and max_tree_depth >= 1 required")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must be in (0, 1)")
        if self.divergence_threshold <= 0:
            raise ValueError("divergence_threshold must be > 0")


@dataclass
class ChainDiagnostics:
    chain: int
    divergences: int
    warmup_divergences: int
    mean_accept_stat: float
    step_size: float
    tree_depth_histogram: Dict[int, int]
    n_leapfrog: int
    inv_metric: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "chain": self.chain,
            "divergences": self.divergences,
            "warmup_divergences": self.warmup_divergences,
            "mean_accept_stat": self.mean_accept_stat,
            "step_size": self.step_size,
            "tree_depth_histogram": {str(k): v for k, v in sorted(self.tree_depth_histogram.items())},
            "n_leapfrog": self.n_leapfrog,
        }


@dataclass
class PosteriorSampleSet:
    """
    samples: (chains * draws) x dim matrix, chain-major
    prior: the prior the target was built with (None for generic targets)
    """

    samples: np.ndarray
    chains: int
    draws: int
    diagnostics: List[ChainDiagnostics]
    max_split_rhat: Optional[float] = None
    prior: Any = None
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.samples.shape[1])

    @property
    def total_divergences(self) -> int:
        return sum(d.divergences for d in self.diagnostics)

    def chain_samples(self, chain: int) -> np.ndarray:
        return self.samples[chain * self.draws:(chain + 1) * self.draws]

    def diagnostics_dict(self) -> Dict[str, Any]:
        return {
            "chains": self.chains,
            "draws_per_chain": self.draws,
            "dim": self.dim,
            "total_divergences": self.total_divergences,
            "max_split_rhat": self.max_split_rhat,
            "per_chain": [d.to_dict() for d in self.diagnostics],
            **self.meta,
        }


# ===== Hamiltonian pieces =====

def evaluate(target: Target, theta: np.ndarray) -> Tuple[float, np.ndarray]:
    """Target value and gradient; NaN/inf or NonFinite map to -inf"""
    try:
        logp, grad = target(theta)
    except NonFinite:
        return -np.inf, np.zeros_like(theta)
    logp = float(logp)
    if not np.isfinite(logp) or not np.all(np.isfinite(grad)):
        return -np.inf, np.zeros_like(theta)
    return logp, np.asarray(grad, dtype=float)


def kinetic_energy(r: np.ndarray, inv_metric: np.ndarray) -> float:
    return 0.5 * float(r @ (inv_metric * r))


def leapfrog(
    theta: np.ndarray,
    r: np.ndarray,
    grad: np.ndarray,
    step_size: float,
    inv_metric: np.ndarray,
    target: Target,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """One leapfrog step; returns (theta, r, grad, logp) at the new point"""
    r_half = r + 0.5 * step_size * grad
    theta_new = theta + step_size * inv_metric * r_half
    logp_new, grad_new = evaluate(target, theta_new)
    r_new = r_half + 0.5 * step_size * grad_new
    return theta_new, r_new, grad_new, logp_new


def find_reasonable_step_size(
    theta: np.ndarray,
    logp: float,
    grad: np.ndarray,
    inv_metric: np.ndarray,
    target: Target,
    rng: np.random.Generator,
) -> float:
    """Doubles or halves the step until the one-step acceptance crosses 1/2"""
    step = 1.0
    r = rng.standard_normal(theta.shape[0]) / np.sqrt(inv_metric)
    joint0 = logp - kinetic_energy(r, inv_metric)

    def log_ratio(eps: float) -> float:
        _, r_new, _, logp_new = leapfrog(theta, r, grad, eps, inv_metric, target)
        value = logp_new - kinetic_energy(r_new, inv_metric) - joint0
        return value if np.isfinite(value) else -np.inf

    ratio = log_ratio(step)
    direction = 1.0 if ratio > math.log(0.5) else -1.0
    for _ in range(100):
        if direction > 0 and not ratio > math.log(0.5):
            break
        if direction < 0 and not ratio < math.log(0.5):
            break
        step = step * (2.0 ** direction)
        if step < 1e-10 or step > 1e7:
            break
        ratio = log_ratio(step)
    return step


# ===== Tree building =====

class _Subtree:
    """Trajectory segment; keeps both edges, the proposal and the running sums"""

    __slots__ = (
        "theta_minus", "r_minus", "grad_minus", "logp_minus",
        "theta_plus", "r_plus", "grad_plus", "logp_plus",
        "theta", "logp", "grad", "n", "s", "alpha", "n_alpha",
        "divergent", "r_sum", "n_leapfrog",
    )

    def __init__(self, theta, r, grad, logp, n, s, alpha, n_alpha, divergent, n_leapfrog):
        self.theta_minus = self.theta_plus = self.theta = theta
        self.r_minus = self.r_plus = r
        self.grad_minus = self.grad_plus = self.grad = grad
        self.logp_minus = self.logp_plus = self.logp = logp
        self.r_sum = np.array(r, copy=True)
        self.n = n
        self.s = s
        self.alpha = alpha
        self.n_alpha = n_alpha
        self.divergent = divergent
        self.n_leapfrog = n_leapfrog

    def edge(self, direction: int):
        if direction < 0:
            return self.theta_minus, self.r_minus, self.grad_minus, self.logp_minus
        return self.theta_plus, self.r_plus, self.grad_plus, self.logp_plus

    def merge(self, other: "_Subtree", direction: int, root: bool, inv_metric: np.ndarray, rng: np.random.Generator):
        """
        Appends `other` on the `direction` side
        Root merges accept the new subtree with probability min(1, n'/n);
        inner merges with n''/(n' + n'')
        """
        if direction < 0:
            inner_self, inner_other = self.r_minus, other.r_plus
            sum_minus, sum_plus = other.r_sum, self.r_sum
            self.theta_minus, self.r_minus = other.theta_minus, other.r_minus
            self.grad_minus, self.logp_minus = other.grad_minus, other.logp_minus
        else:
            inner_self, inner_other = self.r_plus, other.r_minus
            sum_minus, sum_plus = self.r_sum, other.r_sum
            self.theta_plus, self.r_plus = other.theta_plus, other.r_plus
            self.grad_plus, self.logp_plus = other.grad_plus, other.logp_plus

        self.alpha += other.alpha
        self.n_alpha += other.n_alpha
        self.n_leapfrog += other.n_leapfrog
        self.divergent = self.divergent or other.divergent
        self.s = self.s and other.s
        if not self.s:
            return

        if root:
            p = min(1.0, other.n / self.n) if self.n > 0 else (1.0 if other.n > 0 else 0.0)
        else:
            total = self.n + other.n
            p = other.n / total if total > 0 else 0.0
        if p > 0.0 and rng.random() < p:
            self.theta, self.logp, self.grad = other.theta, other.logp, other.grad
        self.n += other.n
        self.r_sum = self.r_sum + other.r_sum

        # inner edges: the momenta where the two segments meet
        if direction < 0:
            r_minus_side_end, r_plus_side_start = inner_other, inner_self
        else:
            r_minus_side_end, r_plus_side_start = inner_self, inner_other

        sharp_minus = inv_metric * self.r_minus
        sharp_plus = inv_metric * self.r_plus
        sharp_minus_end = inv_metric * r_minus_side_end
        sharp_plus_start = inv_metric * r_plus_side_start
        self.s = (
            self.r_sum @ sharp_minus > 0
            and self.r_sum @ sharp_plus > 0
            and (sum_minus + r_plus_side_start) @ sharp_minus > 0
            and (sum_minus + r_plus_side_start) @ sharp_minus_end > 0
            and (sum_plus + r_minus_side_end) @ sharp_plus_start > 0
            and (sum_plus + r_minus_side_end) @ sharp_plus > 0
        )


def _build_tree(
    start: _Subtree,
    direction: int,
    depth: int,
    step_size: float,
    log_u: float,
    joint0: float,
    inv_metric: np.ndarray,
    target: Target,
    threshold: float,
    rng: np.random.Generator,
) -> _Subtree:
    if depth == 0:
        theta, r, grad, _ = start.edge(direction)
        theta_new, r_new, grad_new, logp_new = leapfrog(theta, r, grad, direction * step_size, inv_metric, target)
        joint = logp_new - kinetic_energy(r_new, inv_metric) if np.isfinite(logp_new) else -np.inf
        energy_error = joint0 - joint
        divergent = not np.isfinite(joint) or energy_error > threshold
        n = int(np.isfinite(joint) and log_u <= joint)
        alpha = min(1.0, math.exp(joint - joint0)) if np.isfinite(joint) else 0.0
        return _Subtree(theta_new, r_new, grad_new, logp_new, n, not divergent, alpha, 1, divergent, 1)

    first = _build_tree(start, direction, depth - 1, step_size, log_u, joint0, inv_metric, target, threshold, rng)
    if not first.s:
        return first
    second = _build_tree(first, direction, depth - 1, step_size, log_u, joint0, inv_metric, target, threshold, rng)
    first.merge(second, direction, False, inv_metric, rng)
    return first


def nuts_transition(
    theta: np.ndarray,
    logp: float,
    grad: np.ndarray,
    step_size: float,
    inv_metric: np.ndarray,
    target: Target,
    rng: np.random.Generator,
    max_tree_depth: int,
    threshold: float,
) -> Tuple[np.ndarray, float, np.ndarray, Dict[str, Any]]:
    """
    One NUTS transition from theta
    Returns:
        (theta', logp', grad', info) with info keys accept_stat, depth,
        divergent, n_leapfrog
    """
    r0 = rng.standard_normal(theta.shape[0]) / np.sqrt(inv_metric)
    joint0 = logp - kinetic_energy(r0, inv_metric)
    log_u = joint0 + math.log(rng.random() or 1e-300)

    tree = _Subtree(theta, r0, grad, logp, 1, True, 0.0, 0, False, 0)
    depth = 0
    while tree.s and depth < max_tree_depth:
        direction = -1 if rng.random() < 0.5 else 1
        subtree = _build_tree(tree, direction, depth, step_size, log_u, joint0, inv_metric, target, threshold, rng)
        tree.merge(subtree, direction, True, inv_metric, rng)
        depth += 1

    accept_stat = tree.alpha / tree.n_alpha if tree.n_alpha else 0.0
    info = {
        "accept_stat": accept_stat,
        "depth": depth,
        "divergent": tree.divergent,
        "n_leapfrog": tree.n_leapfrog,
    }
    return tree.theta, tree.logp, tree.grad, info


# ===== Adaptation =====

class DualAveraging:
    """Step size adaptation toward a target acceptance statistic"""

    def __init__(self, step_size: float, target_accept: float):
        self.target_accept = target_accept
        self.restart(step_size)

    def restart(self, step_size: float) -> None:
        self.mu = math.log(10.0 * step_size)
        self.h_bar = 0.0
        self.log_step = math.log(step_size)
        self.log_step_bar = 0.0
        self.counter = 0

    def update(self, accept_stat: float) -> float:
        self.counter += 1
        t = self.counter
        eta = 1.0 / (t + T0)
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target_accept - accept_stat)
        self.log_step = self.mu - math.sqrt(t) / GAMMA * self.h_bar
        x_eta = t ** (-KAPPA)
        self.log_step_bar = x_eta * self.log_step + (1.0 - x_eta) * self.log_step_bar
        return math.exp(self.log_step)

    @property
    def final_step_size(self) -> float:
        return math.exp(self.log_step_bar)


def adaptation_windows(warmup: int) -> List[Tuple[int, int]]:
    """
    Slow-adaptation windows [start, end) for the mass matrix: a 75-iteration
    fast buffer, doubling windows from 25, a 50-iteration terminal buffer;
    scaled to 15% / 75% / 10% when warmup is too short
    """
    if warmup < 20:
        return []
    init, term, base = INIT_BUFFER, TERM_BUFFER, BASE_WINDOW
    if init + term + base > warmup:
        init = int(0.15 * warmup)
        term = int(0.1 * warmup)
        base = warmup - init - term
    windows = []
    start, size = init, base
    end_of_slow = warmup - term
    while start < end_of_slow:
        end = start + size
        if end + 2 * size > end_of_slow:
            end = end_of_slow
        windows.append((start, end))
        start, size = end, size * 2
    return windows


def regularized_variance(draws: np.ndarray) -> np.ndarray:
    """Window variance shrunk toward 1e-3"""
    n = draws.shape[0]
    variance = draws.var(axis=0, ddof=1) if n > 1 else np.ones(draws.shape[1])
    return (n / (n + 5.0)) * variance + 1e-3 * (5.0 / (n + 5.0))


def split_rhat(chains: Sequence[np.ndarray]) -> Optional[float]:
    """Largest split-R-hat across parameters; None when too few draws"""
    halves = []
    for draws in chains:
        half = draws.shape[0] // 2
        if half < 2:
            return None
        halves.append(draws[:half])
        halves.append(draws[half:2 * half])
    stacked = np.stack(halves)  # m x n x dim
    m, n = stacked.shape[0], stacked.shape[1]
    chain_means = stacked.mean(axis=1)
    within = stacked.var(axis=1, ddof=1).mean(axis=0)
    between = n * chain_means.var(axis=0, ddof=1)
    var_plus = (n - 1) / n * within + between / n
    valid = within > 0
    if not valid.any():
        return None
    return float(np.max(np.sqrt(var_plus[valid] / within[valid])))


# ===== Sampling =====

def sample_chain(target: Target, init: np.ndarray, cfg: NutsConfig, chain: int, seed: int):
    """
    Warmup plus `draws` transitions for one chain
    Returns:
        (draws x dim samples, ChainDiagnostics)
    """
    rng = make_rng(seed)
    theta = np.asarray(init, dtype=float).copy()
    dim = theta.shape[0]
    logp, grad = evaluate(target, theta)
    if not np.isfinite(logp):
        raise NonFinite(f"chain {chain}: target is not finite at the initial point")

    inv_metric = np.ones(dim)
    step_size = find_reasonable_step_size(theta, logp, grad, inv_metric, target, rng)
    adapter = DualAveraging(step_size, cfg.target_accept)
    windows = adaptation_windows(cfg.warmup)
    window_ends = {end: start for start, end in windows}
    window_draws: List[np.ndarray] = []

    warmup_divergences = 0
    for iteration in range(cfg.warmup):
        theta, logp, grad, info = nuts_transition(
            theta, logp, grad, step_size, inv_metric, target, rng, cfg.max_tree_depth, cfg.divergence_threshold
        )
        warmup_divergences += int(info["divergent"])
        step_size = adapter.update(info["accept_stat"])

        if any(start <= iteration < end for start, end in windows):
            window_draws.append(theta)
        if iteration + 1 in window_ends and window_draws:
            inv_metric = regularized_variance(np.asarray(window_draws))
            window_draws = []
            step_size = find_reasonable_step_size(theta, logp, grad, inv_metric, target, rng)
            adapter.restart(step_size)
            logger.debug(f"chain {chain}: metric updated at warmup iteration {iteration + 1}, step {step_size:.4g}")

    if cfg.warmup > 0:
        step_size = adapter.final_step_size

    samples = np.empty((cfg.draws, dim))
    divergences = 0
    accept_total = 0.0
    depths: Dict[int, int] = {}
    n_leapfrog = 0
    for i in range(cfg.draws):
        theta, logp, grad, info = nuts_transition(
            theta, logp, grad, step_size, inv_metric, target, rng, cfg.max_tree_depth, cfg.divergence_threshold
        )
        samples[i] = theta
        divergences += int(info["divergent"])
        accept_total += info["accept_stat"]
        depths[info["depth"]] = depths.get(info["depth"], 0) + 1
        n_leapfrog += info["n_leapfrog"]

    diagnostics = ChainDiagnostics(
        chain=chain,
        divergences=divergences,
        warmup_divergences=warmup_divergences,
        mean_accept_stat=accept_total / cfg.draws,
        step_size=step_size,
        tree_depth_histogram=depths,
        n_leapfrog=n_leapfrog,
        inv_metric=inv_metric.tolist(),
    )
    if divergences:
        logger.warning(f"chain {chain}: {divergences} divergent transitions after warmup")
    logger.debug(
        f"chain {chain}: step {step_size:.4g}, accept {diagnostics.mean_accept_stat:.3f}, {n_leapfrog} leapfrog steps"
    )
    return samples, diagnostics


def nuts_sample(target: Target, init: np.ndarray, cfg: NutsConfig, workers: int = 1) -> PosteriorSampleSet:
    """
    Runs cfg.chains independent chains
    Args:
        target: theta -> (log density, gradient)
        init: one start point (dim,) shared by all chains, or (chains, dim)
        cfg: Sampler settings; chain c uses derive_seed(cfg.seed, "chain", c)
        workers: Thread pool size over chains
    Returns:
        PosteriorSampleSet with chain-major samples
    Raises:
        AllDivergent: If more than half of the post-warmup transitions diverged
    """
    init = np.asarray(init, dtype=float)
    if init.ndim == 1:
        inits = np.tile(init, (cfg.chains, 1))
    else:
        if init.shape[0] != cfg.chains:
            raise ValueError(f"{init.shape[0]} initial points for {cfg.chains} chains")
        inits = init
    if inits.shape[1] < 1:
        raise ValueError("target dimension must be >= 1")
    if not np.all(np.isfinite(inits)):
        raise ValueError("initial point must be finite")

    def run(chain: int):
        return sample_chain(target, inits[chain], cfg, chain, derive_seed(cfg.seed, "chain", chain))

    results = run_parallel(run, list(range(cfg.chains)), workers)
    chain_draws = [r[0] for r in results]
    diagnostics = [r[1] for r in results]

    result = PosteriorSampleSet(
        samples=np.vstack(chain_draws),
        chains=cfg.chains,
        draws=cfg.draws,
        diagnostics=diagnostics,
        max_split_rhat=split_rhat(chain_draws),
    )
    total = cfg.chains * cfg.draws
    if result.total_divergences > MAX_DIVERGENT_FRACTION * total:
        raise AllDivergent(
            f"{result.total_divergences} of {total} transitions diverged",
            diagnostics=result.diagnostics_dict(),
        )
    return result
