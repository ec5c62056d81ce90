"""Dense symmetric operators and their eigendecompositions.

Everything downstream (filters, stability checks, the wireless experiment)
works with plain dense symmetric matrices: graph Laplacians and periodic
grid discretizations of manifold Laplacians. Signals are plain 1-d float
vectors paired with an operator of matching dimension.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from ._jacobi import jacobi_eig
from .errors import InputValidationError

# Asymmetry above this triggers a warning before symmetrization on ingest.
ASYMMETRY_WARN = 1e-9


@dataclass(frozen=True)
class SymmetricOperator:
    """Dense real symmetric matrix (a discretized Laplacian or a perturbation)."""

    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __post_init__(self):
        self.entries.setflags(write=False)


@dataclass(frozen=True)
class EigenSystem:
    """Ascending eigenvalues with orthonormal eigenvectors (column i <-> value i)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    def __post_init__(self):
        self.eigenvalues.setflags(write=False)
        self.eigenvectors.setflags(write=False)


def symmetric_operator(matrix) -> SymmetricOperator:
    """Ingest a square matrix, symmetrizing as (M + M^T)/2.

    Warns if the asymmetry exceeds 1e-9; rejects non-square or non-finite
    input. The stored matrix is exactly symmetric.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputValidationError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] < 1:
        raise InputValidationError("operator dimension must be >= 1")
    if not np.all(np.isfinite(m)):
        raise InputValidationError("operator entries must be finite")
    asym = np.max(np.abs(m - m.T)) if m.size else 0.0
    if asym > ASYMMETRY_WARN:
        warnings.warn(
            f"input asymmetry {asym:.3e} exceeds {ASYMMETRY_WARN:.0e}; symmetrizing",
            stacklevel=2,
        )
    return SymmetricOperator(entries=(m + m.T) / 2.0)


def sym_eig(op: SymmetricOperator) -> EigenSystem:
    """Full eigendecomposition of a symmetric operator.

    Cyclic Jacobi sweeps (see _jacobi) followed by a stable ascending sort,
    so the output is bit-identical for identical input. Eigenvectors of
    degenerate clusters are basis-arbitrary; downstream code must use
    eigenspace projectors for those, never individual columns.
    """
    if not isinstance(op, SymmetricOperator):
        op = symmetric_operator(op)
    if op.n == 1:
        return EigenSystem(eigenvalues=op.entries.diagonal().copy(), eigenvectors=np.eye(1))
    w, v = jacobi_eig(np.array(op.entries, dtype=float, order="C", copy=True))
    order = np.argsort(w, kind="stable")
    return EigenSystem(eigenvalues=w[order], eigenvectors=np.ascontiguousarray(v[:, order]))


def build_graph_laplacian(weights) -> SymmetricOperator:
    """Combinatorial Laplacian L = diag(row sums) - W of a weighted graph.

    Requires a symmetric, nonnegative weight matrix with zero diagonal.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise InputValidationError(f"weights must be square, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise InputValidationError("weights must be finite")
    if not np.array_equal(w, w.T):
        raise InputValidationError("weights must be symmetric")
    if np.any(w < 0):
        raise InputValidationError("weights must be nonnegative")
    if np.any(np.diagonal(w) != 0):
        raise InputValidationError("weight diagonal must be zero")
    lap = np.diag(w.sum(axis=1)) - w
    return SymmetricOperator(entries=(lap + lap.T) / 2.0)


def build_cycle_laplacian(n: int) -> SymmetricOperator:
    """Unit-weight cycle graph Laplacian; spectrum is 2 - 2cos(2*pi*k/n)."""
    if n < 3:
        raise InputValidationError(f"cycle needs n >= 3, got {n}")
    w = np.zeros((n, n))
    idx = np.arange(n)
    w[idx, (idx + 1) % n] = 1.0
    w[(idx + 1) % n, idx] = 1.0
    return build_graph_laplacian(w)


def build_torus_laplacian(nx: int, ny: int) -> SymmetricOperator:
    """Laplacian of the nx-by-ny periodic grid.

    Kronecker sum of two cycle Laplacians, so its spectrum is the multiset
    of pairwise sums of the cycle spectra.
    """
    if nx < 3 or ny < 3:
        raise InputValidationError(f"torus needs nx, ny >= 3, got {nx}x{ny}")
    lx = build_cycle_laplacian(nx).entries
    ly = build_cycle_laplacian(ny).entries
    lap = np.kron(lx, np.eye(ny)) + np.kron(np.eye(nx), ly)
    return SymmetricOperator(entries=(lap + lap.T) / 2.0)


def spectral_norm(op: SymmetricOperator) -> float:
    """Largest absolute eigenvalue."""
    if not isinstance(op, SymmetricOperator):
        op = symmetric_operator(op)
    eig = sym_eig(op)
    return float(np.max(np.abs(eig.eigenvalues)))


def apply(op: SymmetricOperator, f) -> np.ndarray:
    """Matrix-vector product op @ f."""
    vec = np.asarray(f, dtype=float)
    if vec.shape != (op.n,):
        raise InputValidationError(
            f"signal length {vec.shape} does not match operator dimension {op.n}"
        )
    return op.entries @ vec
