"""Symmetric perturbation generators and stability verification.

Provides the additive symmetric perturbation model L' = L + A, numerical
checks of two classical eigenstructure inequalities (eigenvalue shifts
bounded by ||A||, the Weyl inequality; eigenspace rotation bounded by
(pi/2)||A|| over the spectral gap, Davis-Kahan sin-theta), closed-form
evaluators of the filter and network stability bounds, and randomized
empirical-vs-bound trials on synthetic clustered spectra.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import mnn
from .errors import InputValidationError
from .filters import FdtFilterSpec, build_fdt_spec, fdt_filter_apply, validate_assumption
from .seeding import rng_for
from .spectral_core import SymmetricOperator, spectral_norm, sym_eig, symmetric_operator
from .spectrum_partition import partition_spectrum

BOUND_SLACK = 1e-9


@dataclass(frozen=True)
class PerturbationConfig:
    """Generator settings for the additive symmetric perturbation A."""

    kind: str = "random_symmetric"
    epsilon: float = 0.1
    lognormal_mu: float = 0.0
    lognormal_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("random_symmetric", "lognormal"):
            raise InputValidationError(f"unknown perturbation kind {self.kind!r}")
        if not self.epsilon > 0:
            raise InputValidationError("epsilon must be positive")


def _rescale_to_norm(a: np.ndarray, epsilon: float) -> SymmetricOperator:
    sym = symmetric_operator(a)
    norm = spectral_norm(sym)
    if norm == 0.0:
        raise InputValidationError("cannot rescale a zero perturbation to a positive norm")
    return SymmetricOperator(entries=sym.entries * (epsilon / norm))


def random_symmetric_perturbation(n: int, epsilon: float, seed: int) -> SymmetricOperator:
    """Gaussian symmetric matrix rescaled to spectral norm epsilon exactly."""
    if n < 1:
        raise InputValidationError("n must be >= 1")
    if not epsilon > 0:
        raise InputValidationError("epsilon must be positive")
    g = np.random.default_rng(seed).standard_normal((n, n))
    return _rescale_to_norm((g + g.T) / 2.0, epsilon)


def lognormal_perturbation(n: int, mu: float, sigma: float, epsilon: float, seed: int) -> SymmetricOperator:
    """Entrywise lognormal matrix, symmetrized, rescaled to spectral norm epsilon."""
    if n < 1:
        raise InputValidationError("n must be >= 1")
    if not epsilon > 0:
        raise InputValidationError("epsilon must be positive")
    if sigma < 0:
        raise InputValidationError("sigma must be >= 0")
    g = np.random.default_rng(seed).lognormal(mean=mu, sigma=sigma, size=(n, n))
    return _rescale_to_norm((g + g.T) / 2.0, epsilon)


def perturbation_from_config(n: int, config: PerturbationConfig) -> SymmetricOperator:
    if config.kind == "lognormal":
        return lognormal_perturbation(
            n, config.lognormal_mu, config.lognormal_sigma, config.epsilon, config.seed
        )
    return random_symmetric_perturbation(n, config.epsilon, config.seed)


@dataclass(frozen=True)
class WeylReport:
    max_shift: float
    norm_a: float
    holds: bool


def weyl_check(op: SymmetricOperator, pert: SymmetricOperator) -> WeylReport:
    """Check max_i |lambda_i - lambda'_i| <= ||A|| on sorted spectra."""
    if op.n != pert.n:
        raise InputValidationError(f"dimension mismatch: {op.n} vs {pert.n}")
    lam = sym_eig(op).eigenvalues
    lam_p = sym_eig(symmetric_operator(op.entries + pert.entries)).eigenvalues
    max_shift = float(np.max(np.abs(lam - lam_p)))
    norm_a = spectral_norm(pert)
    return WeylReport(max_shift=max_shift, norm_a=norm_a, holds=max_shift <= norm_a + BOUND_SLACK)


@dataclass(frozen=True)
class DavisKahanReport:
    projector_diff: float
    bound: float
    gap: float
    norm_a: float
    holds: bool


def davis_kahan_check(op: SymmetricOperator, pert: SymmetricOperator, cluster) -> DavisKahanReport:
    """Check the eigenspace rotation bound ||P - P'|| <= (pi/2) ||A|| / gap.

    cluster is a contiguous range of eigenvalue indices of op. The gap is
    computed internally as the smaller of the two cross separations
    (cluster of L vs complement of L', and vice versa); a nonpositive gap
    means the cluster is ill-separated and is rejected.
    """
    if op.n != pert.n:
        raise InputValidationError(f"dimension mismatch: {op.n} vs {pert.n}")
    idx = np.asarray(sorted(int(i) for i in cluster), dtype=int)
    if idx.size == 0 or idx.size >= op.n:
        raise InputValidationError("cluster must be a nonempty proper subset of indices")
    if idx[0] < 0 or idx[-1] >= op.n:
        raise InputValidationError(f"cluster indices out of range 0..{op.n - 1}")
    if not np.all(np.diff(idx) == 1):
        raise InputValidationError("cluster must be a contiguous index range")

    eig = sym_eig(op)
    eig_p = sym_eig(symmetric_operator(op.entries + pert.entries))
    inside = np.zeros(op.n, dtype=bool)
    inside[idx] = True

    sigma, comp = eig.eigenvalues[inside], eig.eigenvalues[~inside]
    omega, comp_p = eig_p.eigenvalues[inside], eig_p.eigenvalues[~inside]
    gap = min(
        float(np.min(np.abs(sigma[:, None] - comp_p[None, :]))),
        float(np.min(np.abs(comp[:, None] - omega[None, :]))),
    )
    if gap <= 0.0:
        raise InputValidationError("ill-separated cluster: computed spectral gap is not positive")

    proj = eig.eigenvectors[:, inside] @ eig.eigenvectors[:, inside].T
    proj_p = eig_p.eigenvectors[:, inside] @ eig_p.eigenvectors[:, inside].T
    diff = spectral_norm(symmetric_operator(proj - proj_p))
    norm_a = spectral_norm(pert)
    bound = (math.pi / 2.0) * norm_a / gap
    return DavisKahanReport(
        projector_diff=diff, bound=bound, gap=gap, norm_a=norm_a,
        holds=diff <= bound + BOUND_SLACK,
    )


def filter_stability_bound(
    d_count: int, n_count: int, alpha: float, epsilon: float, b: float, f_norm: float
) -> float:
    """Closed-form FDT filter stability bound.

    pi*(D+N)/(alpha-epsilon) * epsilon * ||f|| + B*D * epsilon * ||f||.
    Undefined (infinite) at epsilon >= alpha, which is rejected.
    """
    if d_count < 0 or n_count < 0:
        raise InputValidationError("counts must be nonnegative")
    if not alpha > 0:
        raise InputValidationError("alpha must be positive")
    if epsilon < 0 or b < 0 or f_norm < 0:
        raise InputValidationError("epsilon, b and f_norm must be nonnegative")
    if epsilon >= alpha:
        raise InputValidationError(
            f"bound undefined for epsilon = {epsilon} >= alpha = {alpha}"
        )
    return (
        math.pi * (d_count + n_count) / (alpha - epsilon) * epsilon * f_norm
        + b * d_count * epsilon * f_norm
    )


def nn_stability_bound(
    num_layers: int, width: int, d_count: int, n_count: int,
    alpha: float, epsilon: float, b: float, f_norm: float,
) -> float:
    """Closed-form network stability bound.

    L * F^(L-1) * (pi*(D+N)/(alpha-epsilon) + B*D) * epsilon * ||f|| for a
    network with single input/output features and hidden width F.
    """
    if num_layers < 1 or width < 1:
        raise InputValidationError("num_layers and width must be >= 1")
    if d_count < 0 or n_count < 0:
        raise InputValidationError("counts must be nonnegative")
    if not alpha > 0:
        raise InputValidationError("alpha must be positive")
    if epsilon < 0 or b < 0 or f_norm < 0:
        raise InputValidationError("epsilon, b and f_norm must be nonnegative")
    if epsilon >= alpha:
        raise InputValidationError(
            f"bound undefined for epsilon = {epsilon} >= alpha = {alpha}"
        )
    per_filter = math.pi * (d_count + n_count) / (alpha - epsilon) + b * d_count
    return num_layers * width ** (num_layers - 1) * per_filter * epsilon * f_norm


@dataclass(frozen=True)
class StabilityReport:
    """One empirical-vs-theoretical stability trial."""

    epsilon: float
    alpha: float
    d_count: int
    n_count: int
    b_lipschitz: float
    empirical_diff: float
    theoretical_bound: float
    signal_norm: float
    holds: bool


def clustered_spectrum(rng: np.random.Generator, alpha: float, n: int) -> np.ndarray:
    """Synthetic spectrum with controllable threshold structure.

    Cluster centers are spaced at least 3*alpha apart and members jitter
    within alpha/4 of their center, so partitioning at alpha exactly
    recovers the generated clusters and index order survives perturbations
    up to alpha/2.
    """
    if n < 1:
        raise InputValidationError("n must be >= 1")
    sizes = []
    total = 0
    while total < n:
        s = min(int(rng.integers(1, 5)), n - total)
        sizes.append(s)
        total += s
    center = rng.uniform(0.0, 2.0 * alpha)
    values = []
    for s in sizes:
        values.extend(center + rng.uniform(-alpha / 4.0, alpha / 4.0, size=s))
        center += 3.0 * alpha + rng.uniform(0.0, 3.0 * alpha)
    return np.sort(np.asarray(values))


def clustered_operator(eigenvalues, rng: np.random.Generator) -> SymmetricOperator:
    """Realize a target spectrum as Q diag(lambda) Q^T with random orthogonal Q."""
    lam = np.asarray(eigenvalues, dtype=float)
    g = rng.standard_normal((lam.size, lam.size))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.where(np.diagonal(r) == 0, 1.0, np.diagonal(r)))
    return symmetric_operator((q * lam) @ q.T)


def _perturbed_fdt_spec(spec: FdtFilterSpec, response, eigenvalues_p) -> FdtFilterSpec:
    # Same filter on the perturbed operator: group constants carry over,
    # singleton gains re-evaluate the response at the shifted eigenvalues.
    singles = {i: float(response(eigenvalues_p[i])) for i in spec.partition.singletons}
    return FdtFilterSpec(
        partition=spec.partition,
        singleton_responses=singles,
        group_constants=spec.group_constants,
    )


def _hull_grid(lam_a: np.ndarray, lam_b: np.ndarray) -> tuple[float, float]:
    lo = float(min(lam_a.min(), lam_b.min()))
    hi = float(max(lam_a.max(), lam_b.max()))
    if hi <= lo:
        hi = lo + 1.0
    return lo, hi


def _realize_perturbation(op: SymmetricOperator, pert, alpha: float) -> SymmetricOperator:
    """Materialize a trial perturbation; an explicit operator is accepted as-is."""
    if isinstance(pert, SymmetricOperator):
        a = pert
        if a.n != op.n:
            raise InputValidationError(f"perturbation dimension {a.n} does not match {op.n}")
    else:
        if not pert.epsilon < alpha:
            raise InputValidationError(
                f"trial requires epsilon < alpha, got {pert.epsilon} >= {alpha}"
            )
        a = perturbation_from_config(op.n, pert)
    if not spectral_norm(a) < alpha:
        raise InputValidationError("perturbation norm must stay below alpha")
    return a


def run_filter_stability_trial(
    op: SymmetricOperator, signal, response, alpha: float, pert: PerturbationConfig,
    lip_samples: int = 2001,
) -> StabilityReport:
    """Empirical FDT filter deviation under one perturbation vs the bound.

    The perturbed filter keeps the index structure of the base partition
    (groups pair with the same indices of the perturbed eigensystem) and
    the same group constants; singleton responses follow the shifted
    eigenvalues.
    """
    f = np.asarray(signal, dtype=float)
    if f.shape != (op.n,):
        raise InputValidationError(f"signal shape {f.shape} does not match n = {op.n}")
    a = _realize_perturbation(op, pert, alpha)
    eig = sym_eig(op)
    part = partition_spectrum(eig.eigenvalues, alpha)
    eig_p = sym_eig(symmetric_operator(op.entries + a.entries))

    check = validate_assumption(response, _hull_grid(eig.eigenvalues, eig_p.eigenvalues), lip_samples)
    if not check.passes:
        raise InputValidationError(
            f"response violates the non-amplification requirement "
            f"(max |h| = {check.max_abs_response:.6g})"
        )
    spec = build_fdt_spec(response, part, eig.eigenvalues)
    spec_p = _perturbed_fdt_spec(spec, response, eig_p.eigenvalues)

    empirical = float(np.linalg.norm(fdt_filter_apply(spec, eig, f) - fdt_filter_apply(spec_p, eig_p, f)))
    eps = spectral_norm(a)
    f_norm = float(np.linalg.norm(f))
    bound = filter_stability_bound(part.d_count, part.n_count, alpha, eps, check.lipschitz_estimate, f_norm)
    return StabilityReport(
        epsilon=eps, alpha=alpha, d_count=part.d_count, n_count=part.n_count,
        b_lipschitz=check.lipschitz_estimate, empirical_diff=empirical,
        theoretical_bound=bound, signal_norm=f_norm,
        holds=empirical <= bound + BOUND_SLACK,
    )


def run_nn_stability_trial(
    op: SymmetricOperator, signal, params: mnn.MnnParams, alpha: float,
    pert: PerturbationConfig, lip_samples: int = 2001,
) -> StabilityReport:
    """Empirical network deviation under one perturbation vs the bound.

    Requires single input/output features and uniform hidden width; every
    filter is applied in its threshold-constrained form on both operators,
    sharing the base partition's index structure.
    """
    f = np.asarray(signal, dtype=float)
    if f.shape != (op.n,):
        raise InputValidationError(f"signal shape {f.shape} does not match n = {op.n}")
    if params.features[0] != 1 or params.features[-1] != 1:
        raise InputValidationError("trial requires F_0 = F_L = 1")
    hidden = set(params.features[1:-1])
    if len(hidden) > 1:
        raise InputValidationError("trial requires uniform hidden width")
    width = hidden.pop() if hidden else 1
    a = _realize_perturbation(op, pert, alpha)
    eig = sym_eig(op)
    part = partition_spectrum(eig.eigenvalues, alpha)
    eig_p = sym_eig(symmetric_operator(op.entries + a.entries))

    lo, hi = _hull_grid(eig.eigenvalues, eig_p.eigenvalues)
    xs = np.linspace(lo, hi, lip_samples)
    powers = np.vander(xs, params.taps, increasing=True)
    b_max, amp_max = 0.0, 0.0
    for c in params.coeffs:
        resp = np.tensordot(c, powers, axes=([2], [1]))
        amp_max = max(amp_max, float(np.max(np.abs(resp))))
        slopes = np.abs(np.diff(resp, axis=2)) / np.diff(xs)
        b_max = max(b_max, float(np.max(slopes)))
    if amp_max >= 1.0:
        raise InputValidationError(
            f"filters violate the non-amplification requirement (max |h| = {amp_max:.6g})"
        )

    resp = mnn.fdt_response_tensors(params, part, eig.eigenvalues)
    resp_p = mnn.fdt_response_tensors(params, part, eig.eigenvalues, eig_p.eigenvalues)
    out = mnn.forward_responses(resp, params.activation, eig, f)
    out_p = mnn.forward_responses(resp_p, params.activation, eig_p, f)

    empirical = float(np.linalg.norm(out - out_p))
    eps = spectral_norm(a)
    f_norm = float(np.linalg.norm(f))
    bound = nn_stability_bound(
        params.num_layers, width, part.d_count, part.n_count, alpha, eps, b_max, f_norm
    )
    return StabilityReport(
        epsilon=eps, alpha=alpha, d_count=part.d_count, n_count=part.n_count,
        b_lipschitz=b_max, empirical_diff=empirical, theoretical_bound=bound,
        signal_norm=f_norm, holds=empirical <= bound + BOUND_SLACK,
    )


RESPONSE_KINDS = ("saturating", "tanh", "gaussian", "constant")


def make_response(kind: str, scale: float = 0.9, center: float = 0.0, width: float = 1.0):
    """Named smooth non-amplifying response families for trials and the CLI.

    All satisfy |h| <= scale < 1 on the whole real line for scale < 1.
    """
    if not 0 <= scale < 1:
        raise InputValidationError("scale must lie in [0, 1)")
    if width <= 0:
        raise InputValidationError("width must be positive")
    if kind == "saturating":
        return lambda x: scale * (x - center) / (width + np.abs(x - center))
    if kind == "tanh":
        return lambda x: scale * np.tanh((x - center) / width)
    if kind == "gaussian":
        return lambda x: scale * np.exp(-(((x - center) / width) ** 2))
    if kind == "constant":
        return lambda x: scale * np.ones_like(np.asarray(x, dtype=float))
    raise InputValidationError(f"unknown response kind {kind!r}; choose from {RESPONSE_KINDS}")


@dataclass(frozen=True)
class TrialSuiteSummary:
    trials: int
    violations: int
    max_ratio: float


def summarize_trials(reports) -> TrialSuiteSummary:
    violations = sum(1 for r in reports if not r.holds)
    ratios = [
        r.empirical_diff / r.theoretical_bound for r in reports if r.theoretical_bound > 0
    ]
    return TrialSuiteSummary(
        trials=len(reports), violations=violations,
        max_ratio=float(max(ratios)) if ratios else 0.0,
    )


def _random_trial_response(rng: np.random.Generator, lam: np.ndarray):
    kind = RESPONSE_KINDS[int(rng.integers(0, len(RESPONSE_KINDS)))]
    span = float(lam.max() - lam.min()) or 1.0
    return make_response(
        kind,
        scale=float(rng.uniform(0.3, 0.95)),
        center=float(rng.uniform(lam.min(), lam.max())),
        width=float(rng.uniform(span / 4.0, span)),
    )


def run_filter_stability_suite(
    trials: int, seed: int, alpha: float = 0.5, epsilon: float | None = None,
    dimension: int = 16, kind: str = "random_symmetric", response=None,
) -> list[StabilityReport]:
    """Seeded batch of filter stability trials on clustered synthetic spectra.

    With response=None each trial draws its own smooth non-amplifying
    response; otherwise the given callable is used throughout.
    """
    eps = alpha / 2.0 if epsilon is None else epsilon
    reports = []
    for t in range(trials):
        rng = rng_for(seed, f"filter-stability/{t}")
        lam = clustered_spectrum(rng, alpha, dimension)
        op = clustered_operator(lam, rng)
        f = rng.standard_normal(dimension)
        trial_response = response if response is not None else _random_trial_response(rng, lam)
        pert = PerturbationConfig(kind=kind, epsilon=eps, seed=int(rng.integers(0, 2**62)))
        reports.append(run_filter_stability_trial(op, f, trial_response, alpha, pert))
    return reports


def run_nn_stability_suite(
    trials: int, seed: int, alpha: float = 0.5, epsilon: float | None = None,
    dimension: int = 16, num_layers: int = 2, width: int = 2, taps: int = 4,
    activation: str = "relu", kind: str = "random_symmetric",
) -> list[StabilityReport]:
    """Seeded batch of network stability trials on clustered synthetic spectra."""
    eps = alpha / 2.0 if epsilon is None else epsilon
    features = (1,) + (width,) * max(num_layers - 1, 0) + (1,)
    reports = []
    for t in range(trials):
        rng = rng_for(seed, f"nn-stability/{t}")
        lam = clustered_spectrum(rng, alpha, dimension)
        op = clustered_operator(lam, rng)
        f = rng.standard_normal(dimension)
        params = mnn.init_mnn_params(features, taps, activation, seed=int(rng.integers(0, 2**62)))
        margin = float(rng.uniform(0.5, 0.9))
        params = mnn.scale_to_nonamplifying(params, (lam.min() - eps, lam.max() + eps), margin)
        pert = PerturbationConfig(kind=kind, epsilon=eps, seed=int(rng.integers(0, 2**62)))
        reports.append(run_nn_stability_trial(op, f, params, alpha, pert))
    return reports
