"""Ad-hoc wireless power allocation with a spectral-filter network.

Pipeline: random node placement -> log-pathloss + Rayleigh-fading channel
matrix -> symmetric Laplacian -> train a small spectral network to score
nodes, relax the on/off power decision through a logistic, and ascend the
penalized expected sum rate. Stability is then measured as the sum-rate
gap when the same trained policy is evaluated on a Laplacian built from a
lognormally perturbed channel.

Conventions the channel model needs but the rate formula does not fix:
self-channel distance d_ii is taken as 1 m (pathloss factor 1, fading
still drawn), and fading is drawn independently per ordered node pair.
"""

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import mnn
from .errors import InputValidationError, NumericalError
from .filters import PolyFilter, project_group_constants
from .perturbation_lab import lognormal_perturbation
from .seeding import rng_for, subseed
from .spectral_core import (
    EigenSystem,
    SymmetricOperator,
    build_graph_laplacian,
    sym_eig,
)
from .spectrum_partition import partition_spectrum


@dataclass(frozen=True)
class WirelessScenario:
    """Node layout and power/noise constants of one ad-hoc network."""

    n: int
    positions: np.ndarray
    half_width: float
    pathloss_exponent: float
    p0: float
    p_max: float
    noise_power: float
    seed: int

    def __post_init__(self):
        self.positions.setflags(write=False)


def generate_scenario(
    n: int,
    half_width: float = 50.0,
    seed: int = 0,
    p0: float = 1.0,
    p_max: float | None = None,
    noise_power: float = 1.0,
    pathloss_exponent: float = 2.2,
) -> WirelessScenario:
    """Drop n nodes uniformly on [-half_width, half_width]^2.

    Coincident pairs are resampled so every pairwise distance is positive.
    p_max defaults to half the nodes transmitting at p0.
    """
    if n < 2:
        raise InputValidationError("need at least 2 nodes")
    if not (p0 > 0 and half_width > 0 and noise_power > 0):
        raise InputValidationError("p0, half_width and noise_power must be positive")
    p_max = n * p0 / 2.0 if p_max is None else float(p_max)
    if not p_max > 0:
        raise InputValidationError("p_max must be positive")
    rng = np.random.default_rng(seed)
    pos = rng.uniform(-half_width, half_width, size=(n, 2))
    for _ in range(1000):
        d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
        np.fill_diagonal(d, np.inf)
        clash = np.argwhere(d == 0)
        if clash.size == 0:
            break
        for i in set(int(i) for i, _ in clash):
            pos[i] = rng.uniform(-half_width, half_width, size=2)
    return WirelessScenario(
        n=n, positions=pos, half_width=half_width, pathloss_exponent=pathloss_exponent,
        p0=p0, p_max=p_max, noise_power=noise_power, seed=seed,
    )


def pairwise_distances(scenario: WirelessScenario) -> np.ndarray:
    """Pairwise node distances with the self-channel convention d_ii = 1."""
    d = np.linalg.norm(
        scenario.positions[:, None, :] - scenario.positions[None, :, :], axis=2
    )
    np.fill_diagonal(d, 1.0)
    return d


def channel_matrix(scenario: WirelessScenario, fading_seed: int) -> np.ndarray:
    """Log-scale channel h_ij = log(d_ij^-gamma * fading_ij).

    Fading is Rayleigh with scale 2, drawn independently per ordered pair;
    deterministic for a fixed fading_seed.
    """
    d = pairwise_distances(scenario)
    if np.any(d[~np.eye(scenario.n, dtype=bool)] <= 0):
        raise InputValidationError("zero pairwise distance in scenario")
    rng = np.random.default_rng(fading_seed)
    fading = rng.rayleigh(scale=2.0, size=(scenario.n, scenario.n))
    fading = np.maximum(fading, np.finfo(float).tiny)  # guards the u=0 draw
    return -scenario.pathloss_exponent * np.log(d) + np.log(fading)


def channel_to_laplacian(h: np.ndarray, mode: str = "abs_sym") -> SymmetricOperator:
    """Turn a (possibly signed, asymmetric) channel matrix into a Laplacian.

    abs_sym: weights |h_ij + h_ji| / 2. shift_positive: symmetrize then
    subtract the minimum off-diagonal value if negative. Both yield valid
    nonnegative weights, hence a positive-semidefinite Laplacian.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InputValidationError(f"channel matrix must be square, got {h.shape}")
    sym = (h + h.T) / 2.0
    off = ~np.eye(h.shape[0], dtype=bool)
    if mode == "abs_sym":
        w = np.abs(sym)
    elif mode == "shift_positive":
        w = sym - min(0.0, float(sym[off].min()))
    else:
        raise InputValidationError(f"unknown laplacian mode {mode!r}")
    w = np.where(off, w, 0.0)
    return build_graph_laplacian((w + w.T) / 2.0)


def sum_rate(h: np.ndarray, p, noise: float) -> float:
    """Single-realization sum of log(1 + SINR_i) over transmitters.

    SINR_i = h_ii^2 p_i / (noise + sum_{j != i} h_ij^2 p_j). Expectation
    over fading is estimated by averaging this over fading draws.
    """
    h = np.asarray(h, dtype=float)
    p = np.asarray(p, dtype=float)
    n = h.shape[0]
    if p.shape != (n,):
        raise InputValidationError(f"power vector shape {p.shape} does not match n = {n}")
    if np.any(p < 0):
        raise InputValidationError("powers must be nonnegative")
    gain = h**2
    direct = np.diagonal(gain) * p
    interference = gain @ p - np.diagonal(gain) * p
    return float(np.sum(np.log1p(direct / (noise + interference))))


def sum_rate_power_grad(h: np.ndarray, p, noise: float) -> np.ndarray:
    """Closed-form gradient of sum_rate w.r.t. the power vector."""
    h = np.asarray(h, dtype=float)
    p = np.asarray(p, dtype=float)
    gain = h**2
    a = np.diagonal(gain)
    v = noise + gain @ p - a * p  # noise + interference at each receiver
    u = a * p
    own = a / (v + u)
    # d r_i / d p_k for k != i is -gain_ik * u_i / (v_i (v_i + u_i))
    weights = u / (v * (v + u))
    cross = gain.T @ weights - np.diagonal(gain) * weights
    return own - cross


def logistic(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class AllocationPolicy:
    """Trained scoring network plus the fixed input feature it was trained with.

    lam_scale is the spectral norm of the training Laplacian; every operator
    the policy scores is divided by it, so filters see a unit-scale spectrum
    (keeps polynomial taps well conditioned) and an additive perturbation of
    the operator stays additive after scaling.
    """

    params: mnn.MnnParams
    input_signal: np.ndarray
    p0: float
    lam_scale: float = 1.0
    score_gain: float = 8.0
    output_mode: str = "binary"

    def __post_init__(self):
        if self.output_mode not in ("binary", "relaxed"):
            raise InputValidationError(f"unknown output mode {self.output_mode!r}")
        if self.params.features[-1] != 1:
            raise InputValidationError("policy network must emit one feature per node")
        if not self.lam_scale > 0:
            raise InputValidationError("lam_scale must be positive")
        if not self.score_gain > 0:
            raise InputValidationError("score_gain must be positive")
        self.input_signal.setflags(write=False)


def _scaled(eig: EigenSystem, lam_scale: float) -> EigenSystem:
    return EigenSystem(eigenvalues=eig.eigenvalues / lam_scale, eigenvectors=eig.eigenvectors)


def policy_scores(policy: AllocationPolicy, eig: EigenSystem) -> np.ndarray:
    return mnn.forward(policy.params, _scaled(eig, policy.lam_scale), policy.input_signal)[:, 0]


def relaxed_allocation(policy: AllocationPolicy, scores) -> np.ndarray:
    return policy.p0 * logistic(policy.score_gain * np.asarray(scores))


def binary_allocation(policy: AllocationPolicy, scores) -> np.ndarray:
    """On/off powers: p0 where logistic(score) > 1/2, i.e. score > 0; ties off."""
    return np.where(np.asarray(scores) > 0, policy.p0, 0.0)


def allocation(policy: AllocationPolicy, scores) -> np.ndarray:
    if policy.output_mode == "relaxed":
        return relaxed_allocation(policy, scores)
    return binary_allocation(policy, scores)


@dataclass(frozen=True)
class TrainingConfig:
    """Optimizer and estimator settings for one policy training run.

    score_gain sharpens the logistic relaxation p = p0 * logistic(gain * s)
    so bounded network scores (tanh outputs live in (-1, 1)) can still
    express near-on/off powers; gain 1 recovers the plain relaxation but
    pins powers far from 0 and p0, which stalls ascent in
    interference-dominated scenarios.
    """

    iterations: int = 500
    step_size: float = 0.05
    fading_draws: int = 20
    budget_weight: float = 0.1
    score_gain: float = 8.0
    response_cap: float | None = 2.5
    fdt_alpha: float = 0.001
    project_fdt: bool = True
    seed: int = 0
    eval_draws: int = 50


# spectral interval (on the unit-normalized spectrum) over which per-step
# response caps are enforced; pads [0, 1] for perturbed operators
CAP_RANGE = (-0.2, 1.3)


@dataclass
class TrainingHistory:
    """Per-iteration relaxed-objective estimates plus fixed-draw endpoints."""

    objectives: list[float] = field(default_factory=list)
    initial_objective: float = 0.0
    final_objective: float = 0.0


def _relaxed_objective(channels, powers, scenario, mu) -> float:
    rates = [sum_rate(h, powers, scenario.noise_power) for h in channels]
    excess = max(0.0, float(np.sum(powers)) - scenario.p_max)
    return float(np.mean(rates)) - mu * excess


def train_policy(
    scenario: WirelessScenario,
    config: TrainingConfig,
    features,
    taps: int = 4,
    activation: str = "tanh",
    output_mode: str = "binary",
    label: str = "",
) -> tuple[AllocationPolicy, TrainingHistory]:
    """Gradient-ascend the penalized relaxed sum-rate objective.

    The network scores nodes from the base-channel Laplacian; powers relax
    to p0 * logistic(score); the budget enters as a hinge penalty. After
    every ascent step the filter coefficients are refit so their frequency
    response is constant on each alpha-close eigenvalue group of the base
    spectrum (skipped when the partition has no groups, where the refit is
    the identity). Fully deterministic for a fixed config; label isolates
    the init/fading streams of concurrent trainings while the base channel
    stays shared across a sweep.
    """
    if features[0] != 1 or features[-1] != 1:
        raise InputValidationError("policy network needs one input and one output feature")
    base_channel = channel_matrix(scenario, subseed(config.seed, "base-channel"))
    lap = channel_to_laplacian(base_channel)
    raw_eig = sym_eig(lap)
    lam_scale = max(float(np.max(np.abs(raw_eig.eigenvalues))), 1e-300)
    eig = _scaled(raw_eig, lam_scale)
    part = partition_spectrum(eig.eigenvalues, config.fdt_alpha)
    project = config.project_fdt and part.n_count > 0

    diag = np.diagonal(base_channel)
    x = diag / max(float(np.max(np.abs(diag))), 1e-300)
    params = mnn.init_mnn_params(
        features, taps, activation, seed=subseed(config.seed, f"init/{label}")
    )

    fading_rng = rng_for(config.seed, f"train-fading/{label}")
    eval_channels = [
        channel_matrix(scenario, subseed(config.seed, f"eval-fading/{m}"))
        for m in range(config.eval_draws)
    ]
    history = TrainingHistory()

    gain = config.score_gain

    def scores_and_state(p):
        out, state = mnn.forward(p, eig, x, keep_state=True)
        return out[:, 0], state

    s0, _ = scores_and_state(params)
    history.initial_objective = _relaxed_objective(
        eval_channels, scenario.p0 * logistic(gain * s0), scenario, config.budget_weight
    )

    for it in range(config.iterations):
        scores, state = scores_and_state(params)
        sig = logistic(gain * scores)
        powers = scenario.p0 * sig
        channels = [
            channel_matrix(scenario, int(fading_rng.integers(0, 2**62)))
            for _ in range(config.fading_draws)
        ]
        obj = _relaxed_objective(channels, powers, scenario, config.budget_weight)
        if not math.isfinite(obj):
            raise NumericalError(f"training objective became non-finite at iteration {it}")
        history.objectives.append(obj)

        grad_p = np.mean(
            [sum_rate_power_grad(h, powers, scenario.noise_power) for h in channels], axis=0
        )
        if float(np.sum(powers)) > scenario.p_max:
            grad_p = grad_p - config.budget_weight
        dscore = grad_p * scenario.p0 * sig * (1.0 - sig) * gain
        grads = mnn.gradient(params, eig, state, dscore[:, None])
        # normalized ascent: the rate landscape is nearly flat when every
        # node drowns in interference, so scale-free steps keep all depths
        # moving at the same pace
        gmax = max(float(np.max(np.abs(g))) for g in grads) + 1e-300
        coeffs = tuple(
            c + config.step_size * g / gmax for c, g in zip(params.coeffs, grads)
        )
        params = replace(params, coeffs=coeffs)
        if config.response_cap is not None:
            # bounded per-filter gains keep deep layers out of dead tanh
            # saturation, where perturbation sensitivity would vanish
            params = mnn.cap_responses(params, CAP_RANGE, config.response_cap, samples=801)
        if project:
            params = replace(
                params,
                coeffs=tuple(
                    _project_layer(c, part, eig.eigenvalues) for c in params.coeffs
                ),
            )

    s1, _ = scores_and_state(params)
    history.final_objective = _relaxed_objective(
        eval_channels, scenario.p0 * logistic(gain * s1), scenario, config.budget_weight
    )
    policy = AllocationPolicy(
        params=params, input_signal=x, p0=scenario.p0, lam_scale=lam_scale,
        score_gain=gain, output_mode=output_mode,
    )
    return policy, history


def _project_layer(coeffs: np.ndarray, partition, eigenvalues) -> np.ndarray:
    out = np.empty_like(coeffs)
    for p in range(coeffs.shape[0]):
        for q in range(coeffs.shape[1]):
            filt = project_group_constants(
                PolyFilter(coeffs[p, q]), partition, eigenvalues
            )
            out[p, q] = filt.coeffs
    return out


@dataclass(frozen=True)
class EvaluationConfig:
    """Perturbed-evaluation settings (lognormal channel perturbation)."""

    epsilon: float = 2.0
    lognormal_mu: float = 0.0
    lognormal_sigma: float = 1.0
    perturbation_draws: int = 11
    fading_draws: int = 50
    seed: int = 0


@dataclass
class SweepEntry:
    """Stability measurement for one trained (layers, width) configuration."""

    layers: int
    width: int
    baseline_rate: float
    perturbed_rate: float
    gap: float
    gap_abs: float
    gaps: list[float]
    budget_total: float
    budget_ok: bool


@dataclass
class ExperimentReport:
    entries: list[SweepEntry]
    config: dict
    histories: dict


def _mean_rate(channels, powers, noise) -> float:
    return float(np.mean([sum_rate(h, powers, noise) for h in channels]))


def evaluate_perturbed(
    scenario: WirelessScenario,
    policies: dict,
    train_config: TrainingConfig,
    eval_config: EvaluationConfig,
) -> list[SweepEntry]:
    """Sum-rate gap per (layers, width) when scoring on a perturbed Laplacian.

    The physical channel (and hence the rate) stays the base one; only the
    operator fed to the policy changes, isolating the network's stability.
    Rates average over a shared set of fading draws; the reported gap is
    the median over perturbation draws.
    """
    base_channel = channel_matrix(scenario, subseed(train_config.seed, "base-channel"))
    eig = sym_eig(channel_to_laplacian(base_channel))
    channels = [
        channel_matrix(scenario, subseed(eval_config.seed, f"fading/{m}"))
        for m in range(eval_config.fading_draws)
    ]
    if eval_config.epsilon < 0:
        raise InputValidationError("perturbation epsilon must be >= 0")
    perturbed_eigs = []
    for t in range(eval_config.perturbation_draws):
        if eval_config.epsilon == 0.0:
            perturbed_eigs.append(sym_eig(channel_to_laplacian(base_channel)))
            continue
        a = lognormal_perturbation(
            scenario.n, eval_config.lognormal_mu, eval_config.lognormal_sigma,
            eval_config.epsilon, subseed(eval_config.seed, f"perturbation/{t}"),
        )
        perturbed_eigs.append(sym_eig(channel_to_laplacian(base_channel + a.entries)))

    entries = []
    for (layers, width), policy in sorted(policies.items()):
        base_powers = allocation(policy, policy_scores(policy, eig))
        baseline = _mean_rate(channels, base_powers, scenario.noise_power)
        rates = [
            _mean_rate(channels, allocation(policy, policy_scores(policy, eig_p)), scenario.noise_power)
            for eig_p in perturbed_eigs
        ]
        gaps = [baseline - r for r in rates]
        total = float(np.sum(base_powers))
        entries.append(
            SweepEntry(
                layers=layers, width=width, baseline_rate=baseline,
                perturbed_rate=float(np.median(rates)), gap=float(np.median(gaps)),
                gap_abs=float(np.median(np.abs(gaps))), gaps=gaps, budget_total=total,
                budget_ok=total <= scenario.p_max + scenario.p0,
            )
        )
    return entries


def run_experiment(
    scenario: WirelessScenario,
    layer_grid,
    width_grid,
    train_config: TrainingConfig,
    eval_config: EvaluationConfig,
    taps: int = 4,
    activation: str = "tanh",
    output_mode: str = "binary",
) -> ExperimentReport:
    """Train one policy per (layers, width) pair and measure perturbation gaps."""
    policies, histories = {}, {}
    for layers in layer_grid:
        for width in width_grid:
            features = (1,) + (width,) * (layers - 1) + (1,)
            policy, history = train_policy(
                scenario, train_config, features, taps=taps, activation=activation,
                output_mode=output_mode, label=f"{layers}/{width}",
            )
            policies[(layers, width)] = policy
            histories[(layers, width)] = history
    entries = evaluate_perturbed(scenario, policies, train_config, eval_config)
    config_echo = {
        "scenario": {
            "n": scenario.n, "half_width": scenario.half_width,
            "pathloss_exponent": scenario.pathloss_exponent, "p0": scenario.p0,
            "p_max": scenario.p_max, "noise_power": scenario.noise_power,
            "seed": scenario.seed,
        },
        "layers": list(layer_grid), "widths": list(width_grid),
        "taps": taps, "activation": activation, "output_mode": output_mode,
        "training": asdict(train_config),
        "evaluation": asdict(eval_config),
    }
    return ExperimentReport(entries=entries, config=config_echo, histories=histories)
