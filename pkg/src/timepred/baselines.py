"""Reference multivariate CPD methods: direct segmentation and CUSUM projection.

``vanilla_detect`` runs the DP segmenter on the raw multivariate series.
``project_and_detect`` first reduces to one dimension by projecting onto the
leading left singular vector of the CUSUM transform, then segments the
projected signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cpd_core import CostKind, Segmentation, SegmentationConfig, as_matrix, segment_dynp
from .errors import InvalidRangeError

# Successive-direction stop for the power iteration.  Tighter than the 1e-12
# a caller would need for detection alone: the leading direction should agree
# with a dense SVD to ~1e-6 radians even on small-gap instances.
POWER_ITERATION_TOL = 1e-15
POWER_ITERATION_MAX_STEPS = 1000


@dataclass(frozen=True)
class ProjectionVector:
    """Unit-norm projection direction and the singular value it carries."""

    direction: np.ndarray
    singular_value: float


def vanilla_detect(series, cost: CostKind, config: SegmentationConfig) -> Segmentation:
    """Segment the raw multivariate series directly (thin wrapper over the DP)."""
    return segment_dynp(series, cost, config)


def cusum_transform(series) -> np.ndarray:
    """Scaled before/after mean differences at every candidate split.

    Entry (j, t) for t = 1..T-1 is
    sqrt(t (T - t) / T) * (mean of x_j over the first t points
    - mean of x_j over the remaining T - t points); returns a (d, T-1) matrix.
    """
    X = as_matrix(series)
    T, d = X.shape
    if T < 2:
        raise InvalidRangeError(f"CUSUM transform needs T >= 2, got T={T}")
    csum = np.cumsum(X, axis=0)
    total = csum[-1]
    t = np.arange(1, T, dtype=np.float64)
    left_mean = csum[:-1].T / t
    right_mean = (total[:, None] - csum[:-1].T) / (T - t)
    weight = np.sqrt(t * (T - t) / T)
    return weight * (left_mean - right_mean)


def _power_iteration_top(M: np.ndarray, seed: int):
    """Leading eigenpair of a PSD matrix by seeded power iteration."""
    d = M.shape[0]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    for _ in range(POWER_ITERATION_MAX_STEPS):
        w = M @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:  # degenerate (e.g. constant series): any direction works
            return v, 0.0
        w /= norm
        done = float(w @ v) >= 1.0 - POWER_ITERATION_TOL
        v = w
        if done:
            break
    return v, float(v @ (M @ v))


def projection_direction(series, seed: int = 0) -> ProjectionVector:
    """Leading left singular vector of the CUSUM matrix of the series.

    Computed by power iteration on the d x d Gram of the CUSUM transform
    (memory O(d^2)); the sign is fixed so the largest-magnitude entry is
    positive.
    """
    X = as_matrix(series)
    C = cusum_transform(X)
    M = C @ C.T
    v, lam = _power_iteration_top(M, seed)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return ProjectionVector(direction=v, singular_value=float(np.sqrt(max(lam, 0.0))))


def project_and_detect(series, cost: CostKind, config: SegmentationConfig,
                       seed: int = 0):
    """Project onto the leading CUSUM direction, then segment the 1-d signal.

    Returns (segmentation, projection).
    """
    X = as_matrix(series)
    projection = projection_direction(X, seed=seed)
    projected = X @ projection.direction
    segmentation = segment_dynp(projected.reshape(-1, 1), cost, config)
    return segmentation, projection
