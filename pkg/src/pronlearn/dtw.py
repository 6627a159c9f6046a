"""Exact dynamic time warping and the FastDTW approximation over frame
sequences, with a pluggable frame-distance function.

Alignment steps are {(1,0), (0,1), (1,1)} without slope weights.  Detection
thresholds operate on the per-step (path-length normalized) cost so one
threshold serves inputs of any length.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .audio import MelSpectrogram
from .phonemes import DetectionVerdict


class DtwError(ValueError):
    pass


@dataclass(frozen=True)
class DtwResult:
    """Optimal alignment cost and one realizing warp path.

    ``cost`` is the raw sum of frame distances along ``path``;
    ``normalized_cost`` divides by the path length.
    """

    cost: float
    path: tuple[tuple[int, int], ...]

    @property
    def normalized_cost(self) -> float:
        return self.cost / len(self.path)


def validate_path(path, len_a: int, len_b: int) -> bool:
    """Check start/end/step rules for a warp path over (len_a, len_b)."""
    if not path or path[0] != (0, 0) or path[-1] != (len_a - 1, len_b - 1):
        return False
    for (i0, j0), (i1, j1) in zip(path, path[1:]):
        di, dj = i1 - i0, j1 - j0
        if (di, dj) not in ((1, 0), (0, 1), (1, 1)):
            return False
    return True


class FrameDistance:
    """Frame-distance function with an optional vectorized pairwise form."""

    def __init__(self, fn: Callable, pairwise_fn: Callable | None = None):
        self._fn = fn
        self._pairwise = pairwise_fn

    def __call__(self, x, y) -> float:
        return float(self._fn(x, y))

    def pairwise(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self._pairwise is not None:
            return self._pairwise(a, b)
        return np.array([[self._fn(x, y) for y in b] for x in a], dtype=np.float64)


def _sq_pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # difference form: exactly zero for identical frames, unlike a.a + b.b - 2ab
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


euclidean = FrameDistance(
    lambda x, y: np.sqrt(((x - y) ** 2).sum()),
    lambda a, b: np.sqrt(_sq_pairwise(a, b)),
)

sqeuclidean = FrameDistance(
    lambda x, y: ((x - y) ** 2).sum(),
    _sq_pairwise,
)

absolute = FrameDistance(lambda x, y: np.abs(x - y).sum())


def _as_frames(seq) -> np.ndarray:
    arr = np.asarray(seq, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise DtwError("input must be a non-empty frame sequence")
    return arr


def _cost_matrix(a: np.ndarray, b: np.ndarray, dist) -> np.ndarray:
    if isinstance(dist, FrameDistance):
        return np.asarray(dist.pairwise(a, b), dtype=np.float64)
    return np.array([[float(dist(x, y)) for y in b] for x in a], dtype=np.float64)


def _accumulate(cost: np.ndarray) -> np.ndarray:
    """Fill the accumulated-cost matrix along anti-diagonals (vectorized)."""
    n, m = cost.shape
    acc = np.empty_like(cost)
    acc[0, :] = np.cumsum(cost[0, :])
    acc[:, 0] = np.cumsum(cost[:, 0])
    for d in range(2, n + m - 1):
        i_lo = max(1, d - m + 1)
        i_hi = min(n - 1, d - 1)
        if i_lo > i_hi:
            continue
        i = np.arange(i_lo, i_hi + 1)
        j = d - i
        best = np.minimum(np.minimum(acc[i - 1, j - 1], acc[i - 1, j]), acc[i, j - 1])
        acc[i, j] = cost[i, j] + best
    return acc


def _traceback(acc: np.ndarray) -> tuple[tuple[int, int], ...]:
    i, j = acc.shape[0] - 1, acc.shape[1] - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            # prefer the diagonal on ties for a deterministic optimal path
            diag, up, left = acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1]
            if diag <= up and diag <= left:
                i, j = i - 1, j - 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        path.append((i, j))
    path.reverse()
    return tuple(path)


def _result_from_cost(cost: np.ndarray) -> DtwResult:
    acc = _accumulate(cost)
    path = _traceback(acc)
    return DtwResult(cost=float(acc[-1, -1]), path=path)


def dtw(a, b, dist=euclidean) -> DtwResult:
    """Exact minimal-cost monotone alignment of two frame sequences."""
    fa, fb = _as_frames(a), _as_frames(b)
    return _result_from_cost(_cost_matrix(fa, fb, dist))


def _halve(frames: np.ndarray) -> np.ndarray:
    n = frames.shape[0]
    pairs = frames[: (n // 2) * 2].reshape(n // 2, 2, -1).mean(axis=1)
    if n % 2:
        pairs = np.vstack([pairs, frames[-1:]])
    return pairs


def _window_bounds(path, n: int, m: int, radius: int) -> tuple[np.ndarray, np.ndarray]:
    """Project a coarse path to fine resolution and dilate by ``radius``;
    returns per-row inclusive column bounds."""
    base_lo = np.full(n, m, dtype=np.int64)
    base_hi = np.full(n, -1, dtype=np.int64)
    for ci, cj in path:
        for i in (2 * ci, 2 * ci + 1):
            if i >= n:
                continue
            lo, hi = 2 * cj, min(2 * cj + 1, m - 1)
            base_lo[i] = min(base_lo[i], lo)
            base_hi[i] = max(base_hi[i], hi)
    # rows beyond the doubled path (odd lengths) inherit the last row's bounds
    for i in range(n):
        if base_hi[i] < 0:
            base_lo[i], base_hi[i] = base_lo[i - 1], base_hi[i - 1]
    lo = np.empty(n, dtype=np.int64)
    hi = np.empty(n, dtype=np.int64)
    for i in range(n):
        r0, r1 = max(0, i - radius), min(n - 1, i + radius)
        lo[i] = max(0, base_lo[r0:r1 + 1].min() - radius)
        hi[i] = min(m - 1, base_hi[r0:r1 + 1].max() + radius)
    lo[0] = 0
    hi[-1] = m - 1
    return lo, hi


def _constrained(a: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                 dist) -> DtwResult:
    n, m = a.shape[0], b.shape[0]
    cost = np.full((n, m), np.inf)
    if isinstance(dist, FrameDistance):
        for i in range(n):
            cost[i, lo[i]:hi[i] + 1] = dist.pairwise(a[i:i + 1], b[lo[i]:hi[i] + 1])[0]
    else:
        for i in range(n):
            for j in range(lo[i], hi[i] + 1):
                cost[i, j] = float(dist(a[i], b[j]))
    return _result_from_cost(cost)


def fast_dtw(a, b, radius: int = 2, dist=euclidean) -> DtwResult:
    """Multilevel approximate DTW: coarsen by pairwise frame averaging, solve,
    then refine within ``radius`` of the projected path.

    The returned cost is that of a feasible path, hence >= the exact DTW cost,
    with equality whenever radius >= max(len(a), len(b)).
    """
    if radius < 0:
        raise DtwError("radius must be non-negative")
    fa, fb = _as_frames(a), _as_frames(b)
    return _fast_dtw_rec(fa, fb, radius, dist)


def _fast_dtw_rec(a: np.ndarray, b: np.ndarray, radius: int, dist) -> DtwResult:
    if min(a.shape[0], b.shape[0]) <= radius + 2:
        return _result_from_cost(_cost_matrix(a, b, dist))
    coarse = _fast_dtw_rec(_halve(a), _halve(b), radius, dist)
    lo, hi = _window_bounds(coarse.path, a.shape[0], b.shape[0], radius)
    return _constrained(a, b, lo, hi, dist)


def dtw_detect(user_mel: MelSpectrogram, tts_mel: MelSpectrogram,
               threshold: float, radius: int = 2) -> DetectionVerdict:
    """Audio-baseline detector: FastDTW over Mel frames with Euclidean
    distance, per-step normalized, checked against the threshold."""
    if user_mel.n_mels != tts_mel.n_mels:
        raise DtwError(f"n_mels mismatch: {user_mel.n_mels} vs {tts_mel.n_mels}")
    result = fast_dtw(user_mel.data.T, tts_mel.data.T, radius=radius, dist=euclidean)
    return DetectionVerdict(score=result.normalized_cost, threshold=threshold)
