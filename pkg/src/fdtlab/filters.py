"""Spectral convolutional filters on symmetric operators.

Two filter families share one application path (a per-eigenvalue response
vector conjugated by the eigenbasis):

* polynomial filters, response h(lambda) = sum_k h_k lambda^k;
* frequency-difference-threshold (FDT) filters, which act like an ordinary
  spectral filter on separated eigenvalues but apply one constant gain to
  each alpha-close group, i.e. a scalar multiple of the projector onto the
  group's eigenspace. Constant-per-group responses make the action
  invariant to the basis chosen inside degenerate or grouped clusters.
"""

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import InputValidationError
from .spectral_core import EigenSystem
from .spectrum_partition import SpectrumPartition


@dataclass(frozen=True)
class PolyFilter:
    """Polynomial spectral filter with coefficient vector (h_0 ... h_{K-1})."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.atleast_1d(np.asarray(self.coeffs, dtype=float)))
        if self.coeffs.ndim != 1 or self.coeffs.size < 1:
            raise InputValidationError("coeffs must be a nonempty 1-d vector")
        if not np.all(np.isfinite(self.coeffs)):
            raise InputValidationError("coeffs must be finite")

    @property
    def taps(self) -> int:
        return self.coeffs.size


@dataclass(frozen=True)
class FdtFilterSpec:
    """FDT filter: per-singleton responses plus one constant per group."""

    partition: SpectrumPartition
    singleton_responses: Mapping[int, float]
    group_constants: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "group_constants", np.asarray(self.group_constants, dtype=float).reshape(-1)
        )
        missing = [i for i in self.partition.singletons if i not in self.singleton_responses]
        if missing:
            raise InputValidationError(f"missing responses for singleton indices {missing}")
        if self.group_constants.size != self.partition.n_count:
            raise InputValidationError(
                f"expected {self.partition.n_count} group constants, "
                f"got {self.group_constants.size}"
            )
        values = list(self.singleton_responses.values()) + list(self.group_constants)
        if values and np.max(np.abs(values)) >= 1.0:
            raise InputValidationError("responses and constants must have magnitude < 1")

    def response_vector(self) -> np.ndarray:
        """Per-index gains over the whole spectrum."""
        r = np.empty(self.partition.size)
        for i in self.partition.singletons:
            r[i] = self.singleton_responses[i]
        for c, members in zip(self.group_constants, self.partition.groups):
            for i in members:
                r[i] = c
        return r


@dataclass(frozen=True)
class FilterValidationReport:
    """Grid estimate of the Lipschitz constant and peak magnitude of a response."""

    lipschitz_estimate: float
    max_abs_response: float

    @property
    def passes(self) -> bool:
        return self.max_abs_response < 1.0


def frequency_response(filt: PolyFilter, lam):
    """Evaluate the filter polynomial at lam (scalar or array), Horner style."""
    lam = np.asarray(lam, dtype=float)
    out = np.full_like(lam, filt.coeffs[-1])
    for c in filt.coeffs[-2::-1]:
        out = out * lam + c
    return float(out) if out.ndim == 0 else out


def _spectral_apply(eig: EigenSystem, response: np.ndarray, f: np.ndarray) -> np.ndarray:
    return eig.eigenvectors @ (response * (eig.eigenvectors.T @ f))


def poly_filter_apply(filt: PolyFilter, eig: EigenSystem, f) -> np.ndarray:
    """Apply Phi diag(h(lambda)) Phi^T to the signal f."""
    vec = np.asarray(f, dtype=float)
    if vec.shape != (eig.n,):
        raise InputValidationError(f"signal shape {vec.shape} does not match n = {eig.n}")
    return _spectral_apply(eig, frequency_response(filt, eig.eigenvalues), vec)


def fdt_filter_apply(spec: FdtFilterSpec, eig: EigenSystem, f) -> np.ndarray:
    """Apply an FDT filter: singleton responses plus constant-gain projectors.

    The partition must have been computed from eig's eigenvalues (same
    length; indices in range).
    """
    vec = np.asarray(f, dtype=float)
    if spec.partition.size != eig.n:
        raise InputValidationError(
            f"partition covers {spec.partition.size} indices but operator has n = {eig.n}"
        )
    if vec.shape != (eig.n,):
        raise InputValidationError(f"signal shape {vec.shape} does not match n = {eig.n}")
    return _spectral_apply(eig, spec.response_vector(), vec)


def group_midpoints(partition: SpectrumPartition, eigenvalues) -> np.ndarray:
    """Midpoint of each group's eigenvalue interval."""
    lam = np.asarray(eigenvalues, dtype=float)
    return np.array([(lam[g[0]] + lam[g[-1]]) / 2.0 for g in partition.groups])


def build_fdt_spec(
    response: Callable[[float], float],
    partition: SpectrumPartition,
    eigenvalues,
) -> FdtFilterSpec:
    """Realize a scalar response as an FDT filter on a partitioned spectrum.

    Singletons take response(lambda_i); each group takes the response at the
    midpoint of its eigenvalue interval. Amplifying responses (magnitude
    >= 1 at any of those points) are rejected.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size != partition.size:
        raise InputValidationError(
            f"eigenvalue vector length {lam.size} does not match partition size {partition.size}"
        )
    singles = {i: float(response(lam[i])) for i in partition.singletons}
    constants = np.array([float(response(m)) for m in group_midpoints(partition, lam)])
    values = np.array(list(singles.values()) + list(constants))
    if values.size and np.max(np.abs(values)) >= 1.0:
        raise InputValidationError(
            f"amplifying response: max magnitude {np.max(np.abs(values)):.6g} >= 1"
        )
    return FdtFilterSpec(
        partition=partition, singleton_responses=singles, group_constants=constants
    )


def _lstsq_poly(lam: np.ndarray, targets: np.ndarray, degree: int) -> PolyFilter:
    # Monomial columns scaled by powers of max(1, max|lambda|) keep the
    # normal equations conditioned at desk-scale degrees.
    if degree < 0:
        raise InputValidationError("degree must be >= 0")
    n_distinct = np.unique(lam).size
    if degree + 1 > n_distinct:
        raise InputValidationError(
            f"degree {degree} needs {degree + 1} distinct points, got {n_distinct}"
        )
    scale = max(1.0, float(np.max(np.abs(lam))))
    design = np.vander(lam / scale, degree + 1, increasing=True)
    sol, _, rank, _ = np.linalg.lstsq(design, targets, rcond=None)
    if rank < degree + 1:
        raise InputValidationError(f"degenerate fit: design matrix rank {rank} < {degree + 1}")
    return PolyFilter(coeffs=sol / scale ** np.arange(degree + 1))


def fit_polynomial_to_fdt(spec: FdtFilterSpec, eigenvalues, degree: int) -> PolyFilter:
    """Least-squares polynomial approximation of an FDT response.

    Targets are (lambda_i, response_i) pairs: the singleton response at
    singleton eigenvalues and the group constant at every member of a
    group.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size != spec.partition.size:
        raise InputValidationError(
            f"eigenvalue vector length {lam.size} does not match partition size "
            f"{spec.partition.size}"
        )
    return _lstsq_poly(lam, spec.response_vector(), degree)


def project_group_constants(
    filt: PolyFilter, partition: SpectrumPartition, eigenvalues
) -> PolyFilter:
    """Refit a polynomial so its response is (least-squares) constant per group.

    Targets keep the current response at singleton eigenvalues and use the
    group-averaged response on every member of each group. Unlike the FDT
    spec path this imposes no magnitude cap, so it is usable mid-training.
    With no groups the fit reproduces the input polynomial.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size != partition.size:
        raise InputValidationError(
            f"eigenvalue vector length {lam.size} does not match partition size "
            f"{partition.size}"
        )
    targets = frequency_response(filt, lam).copy()
    for members in partition.groups:
        idx = list(members)
        targets[idx] = float(np.mean(targets[idx]))
    return _lstsq_poly(lam, targets, filt.taps - 1)


def validate_assumption(
    response: Callable, grid: tuple[float, float], samples: int = 10_000
) -> FilterValidationReport:
    """Estimate Lipschitz constant and peak magnitude of a response on a grid.

    The Lipschitz figure is a finite-difference estimate over uniform
    samples, not a certified bound; it feeds the stability bound formulas.
    """
    lo, hi = float(grid[0]), float(grid[1])
    if samples < 2:
        raise InputValidationError("need at least 2 samples")
    if not hi > lo:
        raise InputValidationError(f"grid must satisfy lambda_min < lambda_max, got {grid}")
    xs = np.linspace(lo, hi, samples)
    try:
        hs = np.asarray(response(xs), dtype=float)
        if hs.shape != xs.shape:
            raise TypeError
    except (TypeError, ValueError):
        hs = np.array([float(response(x)) for x in xs])
    if not np.all(np.isfinite(hs)):
        raise InputValidationError("response produced non-finite values on the grid")
    slopes = np.abs(np.diff(hs)) / np.diff(xs)
    return FilterValidationReport(
        lipschitz_estimate=float(np.max(slopes)),
        max_abs_response=float(np.max(np.abs(hs))),
    )
