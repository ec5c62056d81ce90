"""Threshold partitioning of sorted spectra, plus asymptotic growth tools.

A sorted spectrum is split into clusters wherever a consecutive gap exceeds
the threshold alpha (a gap exactly equal to alpha does not split; repeated
eigenvalues always share a cluster). Size-1 clusters are the separated
eigenvalues, larger clusters are the groups. Boundary gaps count as
infinite, so extremal eigenvalues are separated unless alpha-close to their
single neighbor.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputValidationError


@dataclass(frozen=True)
class SpectrumPartition:
    """Alpha-separated decomposition: singleton indices plus grouped index runs."""

    alpha: float
    singletons: tuple[int, ...]
    groups: tuple[tuple[int, ...], ...]
    size: int = field(default=0)

    @property
    def d_count(self) -> int:
        return len(self.singletons)

    @property
    def n_count(self) -> int:
        return len(self.groups)

    def response_targets(self) -> list[int]:
        """Cluster label per eigenvalue index: -1 for singletons, group id otherwise."""
        labels = [-1] * self.size
        for g, members in enumerate(self.groups):
            for i in members:
                labels[i] = g
        return labels


def partition_spectrum(eigenvalues, alpha: float) -> SpectrumPartition:
    """Single-linkage clustering of a sorted spectrum on consecutive gaps.

    Splits exactly at gaps > alpha, which is the unique partition in which
    each group member sits within alpha of a neighbor inside its group and
    distinct clusters are more than alpha apart.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.ndim != 1 or lam.size < 1:
        raise InputValidationError("eigenvalues must be a nonempty 1-d vector")
    if not np.all(np.isfinite(lam)):
        raise InputValidationError("eigenvalues must be finite")
    if np.any(np.diff(lam) < 0):
        raise InputValidationError("eigenvalues must be sorted ascending")
    if not (alpha > 0):
        raise InputValidationError(f"alpha must be positive, got {alpha}")

    splits = np.flatnonzero(np.diff(lam) > alpha)
    clusters = np.split(np.arange(lam.size), splits + 1)
    singletons = tuple(int(c[0]) for c in clusters if c.size == 1)
    groups = tuple(tuple(int(i) for i in c) for c in clusters if c.size >= 2)
    return SpectrumPartition(alpha=float(alpha), singletons=singletons, groups=groups, size=lam.size)


def weyl_gap_index(alpha: float, d: int, c1: float, volume: float) -> int:
    """Index past which consecutive eigenvalue gaps of a d-dimensional
    Laplacian fall below alpha, from the asymptotic eigenvalue growth law.

    ceil((alpha*d/c1)^(d/(2-d)) * (C_d * volume)^(2/(2-d))) with C_d the
    d-dimensional unit-ball volume. The exponents are singular at d = 2,
    which is refused.
    """
    if d == 2:
        raise InputValidationError("dimension d = 2 is unsupported (singular exponents)")
    if not (isinstance(d, (int, np.integer)) and d >= 1):
        raise InputValidationError(f"dimension must be a positive integer, got {d}")
    if not (alpha > 0 and c1 > 0 and volume > 0):
        raise InputValidationError("alpha, c1 and volume must all be positive")
    unit_ball = math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)
    value = (alpha * d / c1) ** (d / (2.0 - d)) * (unit_ball * volume) ** (2.0 / (2.0 - d))
    return int(math.ceil(value))


def weyl_law_fit(eigenvalues, k_lo: int, k_hi: int) -> float:
    """Log-log slope of eigenvalue against index over [k_lo, k_hi].

    For a d-dimensional discretization the low-frequency slope approaches
    2/d. Index 0 (the zero eigenvalue of a connected Laplacian) must be
    excluded by choosing k_lo >= 1.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if not (1 <= k_lo < k_hi <= lam.size - 1):
        raise InputValidationError(
            f"need 1 <= k_lo < k_hi <= n-1, got [{k_lo}, {k_hi}] with n = {lam.size}"
        )
    window = lam[k_lo : k_hi + 1]
    if np.any(window <= 0):
        raise InputValidationError("eigenvalues in the fit range must be positive")
    k = np.arange(k_lo, k_hi + 1, dtype=float)
    slope, _ = np.polyfit(np.log(k), np.log(window), 1)
    return float(slope)
