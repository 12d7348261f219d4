"""Exact k-th nearest-neighbour distances.

A BLAS prefilter (``|x|^2 + |y|^2 - 2 x.y``) finds candidates; every
candidate distance is then recomputed with :func:`pair_distances`, which
sums squared differences column by column, left to right. Results are
therefore bit-identical to a naive double loop that evaluates
``sqrt(sum((a - b) * (a - b)))`` in the same order.
"""
from __future__ import annotations

import numpy as np

_EPS = np.finfo(np.float64).eps
_BLOCK_CELLS = 1 << 22
_PAIR_CELLS = 1 << 22


def pair_distances(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row-wise L2 distance between paired rows ``x[i]`` and ``y[i]``."""
    acc = np.zeros(x.shape[0], dtype=np.float64)
    for j in range(x.shape[1]):
        diff = x[:, j] - y[:, j]
        acc += diff * diff
    return np.sqrt(acc)


def _exact_for_pairs(query, ref, qi, ri) -> np.ndarray:
    out = np.empty(len(qi), dtype=np.float64)
    step = max(1, _PAIR_CELLS // max(1, query.shape[1]))
    for s in range(0, len(qi), step):
        e = s + step
        out[s:e] = pair_distances(query[qi[s:e]], ref[ri[s:e]])
    return out


def kth_nearest_distances(
    query: np.ndarray, ref: np.ndarray, k: int = 1, *, exclude_self: bool = False
) -> np.ndarray:
    """Distance from each query row to its k-th nearest row of ``ref``.

    With ``exclude_self`` the query must be ``ref`` itself and row ``i`` is
    not its own neighbour (duplicates at other indices still count).
    """
    query = np.ascontiguousarray(query, dtype=np.float64)
    ref = np.ascontiguousarray(ref, dtype=np.float64)
    n_q, d = query.shape
    n_r = ref.shape[0]
    available = n_r - 1 if exclude_self else n_r
    if exclude_self and query.shape != ref.shape:
        raise ValueError("exclude_self requires query and ref to be the same rows")
    if not 1 <= k <= available:
        raise ValueError(f"k={k} out of range for {available} reference rows")
    if n_q == 0:
        return np.empty(0)

    qn = np.einsum("ij,ij->i", query, query)
    rn = np.einsum("ij,ij->i", ref, ref)
    rn_max = float(rn.max())
    block = max(1, _BLOCK_CELLS // n_r)
    out = np.empty(n_q, dtype=np.float64)
    for s in range(0, n_q, block):
        e = min(n_q, s + block)
        approx = qn[s:e, None] + rn[None, :] - 2.0 * (query[s:e] @ ref.T)
        np.maximum(approx, 0.0, out=approx)
        if exclude_self:
            approx[np.arange(e - s), np.arange(s, e)] = np.inf
        kth = np.partition(approx, k - 1, axis=1)[:, k - 1]
        tol = 8.0 * (d + 2) * _EPS * (qn[s:e] + rn_max) + 1e-300
        rows, cols = np.nonzero(approx <= (kth + tol)[:, None])
        dist = _exact_for_pairs(query, ref, rows + s, cols)
        order = np.lexsort((dist, rows))
        counts = np.bincount(rows, minlength=e - s)
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        out[s:e] = dist[order][starts + k - 1]
    return out


def nearest_distances(query, ref, *, exclude_self: bool = False) -> np.ndarray:
    return kth_nearest_distances(query, ref, 1, exclude_self=exclude_self)
