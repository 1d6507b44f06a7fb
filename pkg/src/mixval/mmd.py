"""Multiple-kernel maximum mean discrepancy between sample sets.

The discrepancy between two empirical distributions is estimated as a
convex combination of per-kernel squared-MMD statistics over a bank of
Gaussian kernels at several length scales, square-rooted after clamping
at zero.  Kernel sums use compensated accumulation so the result does
not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import DegenerateDataError, DomainError

# default multi-scale bank: bandwidth multipliers around the median heuristic
_DEFAULT_SCALES = (0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel k(x, y) = exp(-||x - y||^2 / (2 * bandwidth^2))."""

    bandwidth: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise DomainError(f"bandwidth must be finite and > 0, got {self.bandwidth}")


@dataclass(frozen=True)
class MultiKernelSpec:
    """Convex combination of Gaussian kernels."""

    kernels: tuple[KernelSpec, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.kernels:
            raise DomainError("kernel bank must be nonempty")
        if len(self.kernels) != len(self.weights):
            raise DomainError(
                f"{len(self.kernels)} kernels but {len(self.weights)} weights"
            )
        if any(w < 0 for w in self.weights):
            raise DomainError("kernel weights must be nonnegative")
        if abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise DomainError("kernel weights must sum to 1 within 1e-12")

    @classmethod
    def from_bandwidths(
        cls, bandwidths: list[float] | tuple[float, ...], weights=None
    ) -> "MultiKernelSpec":
        """Bank from explicit bandwidths; uniform weights unless given."""
        kernels = tuple(KernelSpec(b) for b in bandwidths)
        if weights is None:
            weights = (1.0 / len(kernels),) * len(kernels)
        return cls(kernels=kernels, weights=tuple(float(w) for w in weights))

    @classmethod
    def median_bank(
        cls,
        x: np.ndarray,
        y: np.ndarray,
        scales: tuple[float, ...] = _DEFAULT_SCALES,
    ) -> "MultiKernelSpec":
        """Bank of scaled median-heuristic bandwidths with uniform weights."""
        med = median_heuristic(x, y)
        return cls.from_bandwidths([s * med for s in scales])


@dataclass(frozen=True)
class DiscrepancyEstimate:
    """MMD estimate: nonnegative value plus the raw signed squared statistic.

    ``value`` is sqrt(max(squared, 0)); the unbiased squared statistic may
    be slightly negative, and downstream scoring needs a stable distance
    while tests need the signed statistic.
    """

    value: float
    squared: float
    estimator: str


def gaussian_kernel(x: np.ndarray, y: np.ndarray, spec: KernelSpec) -> float:
    """Evaluate one Gaussian kernel on a pair of vectors."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise DomainError(f"dimension mismatch: {x.shape} vs {y.shape}")
    d2 = float(np.dot(x - y, x - y))
    return math.exp(-d2 / (2.0 * spec.bandwidth**2))


def median_heuristic(x: np.ndarray, y: np.ndarray) -> float:
    """Median pairwise Euclidean distance over the pooled sample set.

    A zero median (over half the points coincide) falls back to the
    smallest positive distance; a pooled set with no positive distance
    at all has no usable scale.
    """
    pooled = np.vstack([_as_matrix(x, "X"), _as_matrix(y, "Y")])
    if len(pooled) < 2:
        raise DomainError("median heuristic needs at least 2 pooled points")
    dists = pdist(pooled)
    med = float(np.median(dists))
    if med == 0.0:
        positive = dists[dists > 0]
        if positive.size == 0:
            raise DegenerateDataError("all pooled points identical; no length scale")
        med = float(positive.min())
    return med


def _as_matrix(v: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DomainError(f"{name} must be a 1-d or 2-d array, got ndim={a.ndim}")
    return a


def _kernel_matrix(x: np.ndarray, y: np.ndarray, bandwidth: float) -> np.ndarray:
    d2 = cdist(x, y, metric="sqeuclidean")
    return np.exp(-d2 / (2.0 * bandwidth**2))


def _mean_all(k: np.ndarray) -> float:
    # compensated: exact row sums are reduced with fsum, so any row
    # evaluation order gives the same total
    return math.fsum(np.sum(k, axis=1)) / k.size


def _mean_offdiag(k: np.ndarray) -> float:
    n = len(k)
    total = math.fsum(np.sum(k, axis=1)) - math.fsum(np.diag(k))
    return total / (n * (n - 1))


def mmd(
    x: np.ndarray,
    y: np.ndarray,
    spec: MultiKernelSpec,
    estimator: str = "biased",
) -> DiscrepancyEstimate:
    """Multi-kernel MMD between sample sets X and Y.

    The biased (V-statistic) form averages all pairs including self
    pairs and is nonnegative by construction; the unbiased (U-statistic)
    form excludes self pairs within X and within Y and needs at least
    two points per set.
    """
    x = _as_matrix(x, "X")
    y = _as_matrix(y, "Y")
    if x.shape[1] != y.shape[1]:
        raise DomainError(f"feature dims differ: {x.shape[1]} vs {y.shape[1]}")
    if estimator not in ("biased", "unbiased"):
        raise DomainError(f"estimator must be 'biased' or 'unbiased', got {estimator!r}")
    minimum = 1 if estimator == "biased" else 2
    if len(x) < minimum or len(y) < minimum:
        raise DomainError(
            f"{estimator} estimator needs at least {minimum} points per set, "
            f"got {len(x)} and {len(y)}"
        )
    per_kernel = []
    for kern in spec.kernels:
        kxx = _kernel_matrix(x, x, kern.bandwidth)
        kyy = _kernel_matrix(y, y, kern.bandwidth)
        kxy = _kernel_matrix(x, y, kern.bandwidth)
        if estimator == "biased":
            sq = _mean_all(kxx) + _mean_all(kyy) - 2.0 * _mean_all(kxy)
        else:
            sq = _mean_offdiag(kxx) + _mean_offdiag(kyy) - 2.0 * _mean_all(kxy)
        per_kernel.append(sq)
    squared = math.fsum(w * sq for w, sq in zip(spec.weights, per_kernel))
    return DiscrepancyEstimate(
        value=math.sqrt(max(squared, 0.0)),
        squared=squared,
        estimator=estimator,
    )
