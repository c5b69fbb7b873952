"""Pure-numpy implementations of the hot kernels.

Semantics match the compiled backend: all nearest-neighbor comparisons are
made on squared Euclidean distances with ties broken by the smallest point
index, and the KDE gradient is the exact gradient of the log of an
equal-weight Gaussian kernel density estimate.
"""

from __future__ import annotations

import numpy as np

_CHUNK = 256


def _as_points(a: np.ndarray, name: str) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError(f"{name} must have shape (N, 3)")
    return a


def nn_query(points: np.ndarray, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact nearest neighbor of each query. Returns (indices, distances)."""
    points = _as_points(points, "points")
    queries = _as_points(queries, "queries")
    if points.shape[0] == 0:
        raise ValueError("empty input")
    idx = np.empty(queries.shape[0], dtype=np.int64)
    dist = np.empty(queries.shape[0], dtype=np.float64)
    for lo in range(0, queries.shape[0], _CHUNK):
        q = queries[lo : lo + _CHUNK]
        d2 = ((q[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
        # argmin returns the first (smallest-index) minimizer
        best = np.argmin(d2, axis=1)
        idx[lo : lo + _CHUNK] = best
        dist[lo : lo + _CHUNK] = np.sqrt(d2[np.arange(q.shape[0]), best])
    return idx, dist


def knn_query(points: np.ndarray, queries: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest points per query, ordered by (distance, index)."""
    points = _as_points(points, "points")
    queries = _as_points(queries, "queries")
    n = points.shape[0]
    if k < 0 or k > n:
        raise ValueError("k exceeds cloud size")
    out = np.empty((queries.shape[0], k), dtype=np.int64)
    if k == 0:
        return out
    for lo in range(0, queries.shape[0], _CHUNK):
        q = queries[lo : lo + _CHUNK]
        d2 = ((q[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
        # stable sort keeps ascending index order among exact ties
        out[lo : lo + _CHUNK] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


def fps(points: np.ndarray, count: int, start: int) -> np.ndarray:
    """Greedy farthest point sampling starting from index ``start``."""
    points = _as_points(points, "points")
    n = points.shape[0]
    if not 1 <= count <= n:
        raise ValueError("count must be in 1..N")
    if not 0 <= start < n:
        raise ValueError("start index out of range")
    chosen = np.empty(count, dtype=np.int64)
    chosen[0] = start
    mind2 = ((points - points[start]) ** 2).sum(axis=1)
    for j in range(1, count):
        nxt = int(np.argmax(mind2))  # first occurrence = smallest index on ties
        chosen[j] = nxt
        d2 = ((points - points[nxt]) ** 2).sum(axis=1)
        np.minimum(mind2, d2, out=mind2)
    return chosen


def kde_gradient(
    points: np.ndarray,
    queries: np.ndarray,
    bandwidth: float,
    trunc_radius: float = 0.0,
) -> np.ndarray:
    """Gradient of log of the equal-weight Gaussian KDE at each query.

    grad(x) = sum_i w_i(x) (p_i - x) / h^2 with w_i the softmax of
    -|x - p_i|^2 / (2 h^2). With ``trunc_radius`` > 0 kernels beyond that
    radius are dropped (the nearest kernel is always kept so the result
    stays defined).
    """
    points = _as_points(points, "points")
    queries = _as_points(queries, "queries")
    if bandwidth <= 0.0:
        raise ValueError("bandwidth must be positive")
    if points.shape[0] == 0:
        raise ValueError("empty input")
    h2 = bandwidth * bandwidth
    out = np.empty_like(queries)
    for lo in range(0, queries.shape[0], _CHUNK):
        q = queries[lo : lo + _CHUNK]
        d2 = ((q[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
        e = -d2 / (2.0 * h2)
        m = e.max(axis=1, keepdims=True)
        w = np.exp(e - m)
        if trunc_radius > 0.0:
            r2 = np.maximum(trunc_radius * trunc_radius, d2.min(axis=1, keepdims=True))
            w = np.where(d2 <= r2, w, 0.0)
        s = w.sum(axis=1, keepdims=True)
        out[lo : lo + _CHUNK] = (w @ points - s * q) / (s * h2)
    return out
