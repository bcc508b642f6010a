"""Exact offline segmentation by dynamic programming over pluggable segment costs.

A series is a dense (T, d) float64 matrix: rows are time steps, columns are
dimensions.  Three segment costs are provided:

* :class:`L2Cost` -- squared deviations from the per-dimension segment mean,
  accelerated with prefix sums (O(d) per query).
* :class:`ARCost` -- per-dimension autoregressive residual sum of squares with
  an intercept, lag matrices rebuilt per query.
* :class:`RBFCost` -- within-segment kernel scatter under a Gaussian kernel,
  Gram sums evaluated directly per query (no global Gram cache), O(n^2 d) per
  query with memory bounded by the chunk size.

:func:`segment_dynp` minimises the total segment cost over all placements of
exactly K breakpoints via dynamic programming and is exact for jump=1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import ConfigError, InfeasibleSegmentationError, InvalidRangeError

# Ridge jitter applied to AR normal equations; keeps rank-deficient segments
# (e.g. constant sequences) solvable without a failure path in DP inner loops.
AR_RIDGE_JITTER = 1e-8

# Segments evaluated by the RBF cost are processed in row blocks of this size
# so per-query temporary memory stays bounded at roughly CHUNK * n floats.
_RBF_CHUNK_ROWS = 512

# Lower-triangle-inclusive mask used to discard double-counted within-block
# pairs without allocating per query.
_RBF_TRIL_MASK = np.tril(np.ones((_RBF_CHUNK_ROWS, _RBF_CHUNK_ROWS)))


def as_matrix(values) -> np.ndarray:
    """Coerce input to a (T, d) float64 matrix, rejecting non-finite entries.

    One-dimensional input is treated as a univariate series of shape (T, 1).
    The returned array is never mutated by this package.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidRangeError(
            f"expected a (T, d) matrix with T >= 1 and d >= 1, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidRangeError("series contains NaN or Inf entries")
    return np.ascontiguousarray(arr)


@dataclass(frozen=True)
class Segmentation:
    """Strictly increasing interior breakpoints splitting [0, T) into segments.

    ``breakpoints = (t_1, ..., t_K)`` with ``0 < t_1 < ... < t_K < T`` implies
    the K+1 segments ``[0, t_1), [t_1, t_2), ..., [t_K, T)``.
    """

    breakpoints: tuple
    T: int

    def __post_init__(self):
        bps = tuple(int(b) for b in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "T", int(self.T))
        if self.T < 1:
            raise ConfigError(f"series length must be >= 1, got {self.T}")
        prev = 0
        for b in bps:
            if not 0 < b < self.T:
                raise ConfigError(f"breakpoint {b} outside (0, {self.T})")
            if b <= prev:
                raise ConfigError(f"breakpoints must be strictly increasing, got {bps}")
            prev = b

    @property
    def n_breakpoints(self) -> int:
        return len(self.breakpoints)

    def segments(self) -> list:
        """Return the list of (start, end) half-open segment bounds."""
        bounds = (0,) + self.breakpoints + (self.T,)
        return list(zip(bounds[:-1], bounds[1:]))


@dataclass(frozen=True)
class L2Cost:
    """Mean-shift cost: sum of squared deviations from the segment mean."""


@dataclass(frozen=True)
class ARCost:
    """Autoregressive cost: per-dimension OLS residual sum of squares.

    Each point is regressed on an intercept plus its ``order`` in-segment lags.
    """

    order: int = 1

    def __post_init__(self):
        if int(self.order) < 1:
            raise ConfigError(f"AR order must be >= 1, got {self.order}")
        object.__setattr__(self, "order", int(self.order))


@dataclass(frozen=True)
class RBFCost:
    """Kernel cost: within-segment scatter under a Gaussian kernel.

    ``bandwidth=None`` resolves the kernel width with the median heuristic on
    the series being segmented.
    """

    bandwidth: Optional[float] = None

    def __post_init__(self):
        if self.bandwidth is not None and not float(self.bandwidth) > 0:
            raise ConfigError(f"RBF bandwidth must be > 0, got {self.bandwidth}")


CostKind = Union[L2Cost, ARCost, RBFCost]


@dataclass(frozen=True)
class SegmentationConfig:
    """Controls for :func:`segment_dynp`.

    ``jump=None`` resolves to 1 for T <= 2000 and 5 otherwise; candidate
    breakpoints are restricted to multiples of ``jump``.
    """

    n_breakpoints: int
    min_segment_length: int = 2
    jump: Optional[int] = None

    def __post_init__(self):
        if int(self.n_breakpoints) < 0:
            raise ConfigError(f"n_breakpoints must be >= 0, got {self.n_breakpoints}")
        if int(self.min_segment_length) < 1:
            raise ConfigError(
                f"min_segment_length must be >= 1, got {self.min_segment_length}"
            )
        if self.jump is not None and int(self.jump) < 1:
            raise ConfigError(f"jump must be >= 1, got {self.jump}")
        object.__setattr__(self, "n_breakpoints", int(self.n_breakpoints))
        object.__setattr__(self, "min_segment_length", int(self.min_segment_length))
        if self.jump is not None:
            object.__setattr__(self, "jump", int(self.jump))

    def resolved_jump(self, T: int) -> int:
        if self.jump is not None:
            return self.jump
        return 1 if T <= 2000 else 5


class _FittedL2:
    """Prefix-sum evaluator for the L2 cost."""

    min_segment_length = 1

    def __init__(self, X: np.ndarray):
        T, d = X.shape
        self._s1 = np.zeros((T + 1, d))
        self._s2 = np.zeros((T + 1, d))
        np.cumsum(X, axis=0, out=self._s1[1:])
        np.cumsum(X * X, axis=0, out=self._s2[1:])
        self.T = T

    def error(self, start: int, end: int) -> float:
        _check_range(start, end, self.T, 1)
        n = end - start
        seg_sum = self._s1[end] - self._s1[start]
        seg_sq = self._s2[end] - self._s2[start]
        val = float(np.sum(seg_sq - seg_sum * seg_sum / n))
        return max(val, 0.0)


class _FittedAR:
    """Per-query OLS evaluator for the autoregressive cost."""

    def __init__(self, X: np.ndarray, order: int):
        self._X = X
        self.order = order
        self.min_segment_length = order + 1
        self.T = X.shape[0]

    def error(self, start: int, end: int) -> float:
        p = self.order
        _check_range(start, end, self.T, p + 1)
        X = self._X
        m = end - start - p  # regression rows
        d = X.shape[1]
        Y = X[start + p : end]  # (m, d)
        A = np.empty((m, d, p + 1))
        A[:, :, 0] = 1.0
        for i in range(1, p + 1):
            A[:, :, i] = X[start + p - i : end - i]
        G = np.einsum("mdi,mdj->dij", A, A)
        b = np.einsum("mdi,md->di", A, Y)
        G[:, np.arange(p + 1), np.arange(p + 1)] += AR_RIDGE_JITTER
        beta = np.linalg.solve(G, b[:, :, None])[:, :, 0]  # (d, p+1)
        resid = Y - np.einsum("mdi,di->md", A, beta)
        return float(np.sum(resid * resid))


class _FittedRBF:
    """Direct Gram-sum evaluator for the Gaussian-kernel cost."""

    def __init__(self, X: np.ndarray, bandwidth: Optional[float]):
        self._X = X
        self.T = X.shape[0]
        self.min_segment_length = 1
        if bandwidth is None:
            bandwidth = median_heuristic_bandwidth(X)
        self.bandwidth = float(bandwidth)
        self._gamma = 1.0 / (2.0 * self.bandwidth * self.bandwidth)
        # gamma * squared row norms, precomputed once per series
        self._gr = self._gamma * np.einsum("td,td->t", X, X)

    def error(self, start: int, end: int) -> float:
        _check_range(start, end, self.T, 1)
        n = end - start
        if n == 1:
            return 0.0
        X = self._X[start:end]
        gr = self._gr[start:end]
        two_gamma = 2.0 * self._gamma
        # Off-diagonal kernel sum over unordered pairs: row blocks against the
        # columns to their right, so memory stays at O(chunk * n) and every
        # elementwise pass runs in place on the block's Gram rectangle.
        off = 0.0
        for i0 in range(0, n, _RBF_CHUNK_ROWS):
            i1 = min(i0 + _RBF_CHUNK_ROWS, n)
            w = i1 - i0
            ker = X[i0:i1] @ X[i0:].T  # (w, n - i0)
            ker *= two_gamma
            ker -= gr[i0:i1, None]
            ker -= gr[None, i0:]
            np.exp(ker, out=ker)  # exp(-gamma * ||x_i - x_j||^2)
            # The leading (w, w) square also covers pairs with j <= i; keep j > i.
            lower = np.einsum("ij,ij->", ker[:, :w], _RBF_TRIL_MASK[:w, :w])
            off += float(ker.sum() - lower)
        gram_total = n + 2.0 * off  # diagonal kernel values are 1
        return max(float(n - gram_total / n), 0.0)


def _check_range(start: int, end: int, T: int, min_len: int) -> None:
    if not (0 <= start < end <= T):
        raise InvalidRangeError(f"invalid segment [{start}, {end}) for series of length {T}")
    if end - start < min_len:
        raise InvalidRangeError(
            f"segment [{start}, {end}) shorter than the minimum length {min_len} for this cost"
        )


def fit_cost(cost: CostKind, series) -> object:
    """Return a fitted evaluator with an ``error(start, end)`` method."""
    X = as_matrix(series)
    if isinstance(cost, L2Cost):
        return _FittedL2(X)
    if isinstance(cost, ARCost):
        return _FittedAR(X, cost.order)
    if isinstance(cost, RBFCost):
        return _FittedRBF(X, cost.bandwidth)
    raise ConfigError(f"unknown cost kind: {cost!r}")


def cost_l2(series, start: int, end: int) -> float:
    """Sum over dimensions of squared deviations from the segment mean."""
    return fit_cost(L2Cost(), series).error(start, end)


def cost_ar(series, start: int, end: int, order: int = 1) -> float:
    """Summed per-dimension AR(order) residual sum of squares over [start, end).

    Lagged regressors are taken from inside the segment only, so the fit uses
    ``end - start - order`` rows; segments shorter than ``order + 1`` raise.
    """
    return fit_cost(ARCost(order), series).error(start, end)


def cost_rbf(series, start: int, end: int, bandwidth: float) -> float:
    """Within-segment Gaussian-kernel scatter ``n - (1/n) sum_{s,t} k(x_s, x_t)``."""
    return fit_cost(RBFCost(bandwidth), series).error(start, end)


def median_heuristic_bandwidth(series, sample_cap: int = 1000, seed: int = 0) -> float:
    """Bandwidth sigma with 2*sigma^2 equal to the median pairwise squared distance.

    At most ``sample_cap`` rows are used, uniformly sub-sampled with the given
    seed when the series is longer.  Falls back to 1.0 when the median is zero
    (e.g. all rows identical).
    """
    X = as_matrix(series)
    T = X.shape[0]
    if T < 2:
        raise InvalidRangeError(f"median heuristic needs T >= 2, got T={T}")
    if sample_cap < 2:
        raise ConfigError(f"sample_cap must be >= 2, got {sample_cap}")
    if T > sample_cap:
        idx = np.sort(np.random.default_rng(seed).choice(T, size=sample_cap, replace=False))
        X = X[idx]
    sq = np.einsum("td,td->t", X, X)
    dist = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    iu = np.triu_indices(X.shape[0], k=1)
    med = float(np.median(dist[iu]))
    if med <= 0.0:
        return 1.0
    return float(np.sqrt(med / 2.0))


def segment_dynp(series, cost: CostKind, config: SegmentationConfig) -> Segmentation:
    """Optimal placement of exactly K breakpoints minimising the total cost.

    Candidate breakpoints are the multiples of ``jump`` inside (0, T); with
    jump=1 the result is the exact global optimum.  Ties are broken toward the
    lexicographically smallest breakpoint vector.  Raises
    :class:`InfeasibleSegmentationError` when no admissible placement exists.
    """
    X = as_matrix(series)
    T = X.shape[0]
    K = config.n_breakpoints
    min_size = config.min_segment_length
    jump = config.resolved_jump(T)

    if isinstance(cost, ARCost) and min_size < cost.order + 1:
        raise ConfigError(
            f"min_segment_length={min_size} is below order+1={cost.order + 1} "
            "required by the AR cost"
        )
    if (K + 1) * min_size > T:
        raise InfeasibleSegmentationError(
            f"cannot split T={T} into {K + 1} segments of length >= {min_size} "
            f"(K={K}, min_segment_length={min_size})"
        )
    if K == 0:
        return Segmentation((), T)

    fitted = fit_cost(cost, X)
    cands = np.arange(jump, T, jump, dtype=int)

    # level[j][s]: optimal cost of covering [s, T) with j breakpoints.  Level 0
    # holds final-segment costs; level K is only ever queried at s=0.
    prev = {}
    for t in cands:
        if T - t >= min_size:
            prev[int(t)] = fitted.error(int(t), T)
    pointers = []
    for j in range(1, K + 1):
        if j == K:
            starts = [0]
        else:
            # s must leave room for K-j earlier breakpoints and j+1 later segments
            starts = [int(t) for t in cands if t >= (K - j) * min_size and t + (j + 1) * min_size <= T]
        cur = {}
        ptr = {}
        for s in starts:
            best = np.inf
            arg = -1
            for t in cands[cands >= s + min_size]:
                tail = prev.get(int(t))
                if tail is None:
                    continue
                val = fitted.error(s, int(t)) + tail
                if val < best:
                    best = val
                    arg = int(t)
            if arg >= 0:
                cur[s] = best
                ptr[s] = arg
        pointers.append(ptr)
        prev = cur

    if 0 not in prev:
        raise InfeasibleSegmentationError(
            f"no admissible segmentation for T={T}, K={K}, "
            f"min_segment_length={min_size}, jump={jump}"
        )
    bps = []
    s = 0
    for j in range(K, 0, -1):
        s = pointers[j - 1][s]
        bps.append(s)
    return Segmentation(tuple(bps), T)


def total_cost(series, cost: CostKind, segmentation: Segmentation) -> float:
    """Total segment cost of a given segmentation (summed back-to-front)."""
    fitted = fit_cost(cost, series)
    total = 0.0
    for start, end in reversed(segmentation.segments()):
        total = fitted.error(start, end) + total
    return total


def best_split_gain(series, min_segment_length: int = 2) -> float:
    """No-split L2 cost minus the best single-split L2 cost.

    A large gain means one breakpoint explains the series much better than
    none; pure-noise series have small gains.  Returns 0.0 when the series is
    too short to split.
    """
    X = as_matrix(series)
    T = X.shape[0]
    if T < 2 * min_segment_length:
        return 0.0
    fitted = _FittedL2(X)
    s1, s2 = fitted._s1, fitted._s2
    full = fitted.error(0, T)
    ts = np.arange(min_segment_length, T - min_segment_length + 1)
    n_left = ts.astype(float)
    n_right = (T - ts).astype(float)
    left = np.sum(s2[ts] - s1[ts] ** 2 / n_left[:, None], axis=1)
    right = np.sum(
        (s2[T] - s2[ts]) - (s1[T] - s1[ts]) ** 2 / n_right[:, None], axis=1
    )
    return max(float(full - np.min(left + right)), 0.0)
