"""Least-squares gradient boosting with exact greedy splits, and the R^2 suite.

The suite trains one model on the real training table and one on the
synthetic table, then scores each on train, synthetic and holdout rows.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .dataset import DataTable, as_matrix, encode, fit_encoder
from .errors import DataError, NumericError


@dataclass(frozen=True)
class GbmConfig:
    n_trees: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_samples_leaf: int = 1
    subsample: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise DataError("n_trees must be at least 1")
        if not 0 < self.learning_rate <= 1:
            raise DataError("learning_rate must lie in (0, 1]")
        if self.max_depth < 0 or self.min_samples_leaf < 1:
            raise DataError("max_depth must be >= 0 and min_samples_leaf >= 1")
        if not 0 < self.subsample <= 1:
            raise DataError("subsample must lie in (0, 1]")


@dataclass(frozen=True)
class RegressionTree:
    """Array-encoded binary tree; ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(x.shape[0], dtype=np.intp)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = x[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active[idx] = self.feature[node[idx]] >= 0
        return self.value[node]


@dataclass(frozen=True)
class GbmModel:
    base_prediction: float
    learning_rate: float
    trees: tuple[RegressionTree, ...]
    n_features: int
    train_loss: tuple[float, ...] = field(default=(), compare=False)


def _best_split(x_sorted, r_sorted, min_leaf):
    """Best split on one feature for one node's rows (already sorted by x).

    Returns ``(gain, threshold)`` or ``None``. Among equal gains the lowest
    threshold wins.
    """
    n = len(r_sorted)
    if n < 2 * min_leaf:
        return None
    csum = np.cumsum(r_sorted)
    total = csum[-1]
    n_left = np.arange(1, n)
    s_left = csum[:-1]
    valid = (x_sorted[1:] > x_sorted[:-1]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
    if not valid.any():
        return None
    gain = s_left**2 / n_left + (total - s_left) ** 2 / (n - n_left) - total**2 / n
    gain = np.where(valid, gain, -np.inf)
    pos = int(np.argmax(gain))
    lo, hi = x_sorted[pos], x_sorted[pos + 1]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return float(gain[pos]), float(thr)


def _fit_tree(x, order, resid, rows, max_depth, min_leaf) -> RegressionTree:
    """Grow a depth-limited least-squares tree on ``rows`` of ``x``.

    ``order[:, f]`` holds all row indices sorted by feature f (stable).
    """
    n_total = x.shape[0]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(members):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(resid[members].mean()))
        return len(feature) - 1

    in_node = np.full(n_total, -1, dtype=np.intp)
    root = new_node(rows)
    in_node[rows] = root
    frontier = [(root, rows)]
    for _ in range(max_depth):
        next_frontier = []
        for node_id, members in frontier:
            if len(members) < 2 * min_leaf:
                continue
            mask = in_node == node_id
            best = None
            for f in range(x.shape[1]):
                idx = order[:, f][mask[order[:, f]]]
                cand = _best_split(x[idx, f], resid[idx], min_leaf)
                # strict comparison keeps the lowest feature index on ties
                if cand is not None and (best is None or cand[0] > best[0]):
                    best = (cand[0], f, cand[1])
            if best is None or not best[0] > 1e-12 * max(1.0, float(resid[members] @ resid[members])):
                continue
            _, f, thr = best
            go_left = x[members, f] <= thr
            l_rows, r_rows = members[go_left], members[~go_left]
            l_id, r_id = new_node(l_rows), new_node(r_rows)
            feature[node_id], threshold[node_id] = f, thr
            left[node_id], right[node_id] = l_id, r_id
            in_node[l_rows], in_node[r_rows] = l_id, r_id
            next_frontier += [(l_id, l_rows), (r_id, r_rows)]
        frontier = next_frontier
        if not frontier:
            break
    return RegressionTree(
        np.array(feature, dtype=np.intp),
        np.array(threshold),
        np.array(left, dtype=np.intp),
        np.array(right, dtype=np.intp),
        np.array(value),
    )


def gbm_fit(features, target, cfg: GbmConfig = GbmConfig()) -> GbmModel:
    x = as_matrix(features)
    y = np.asarray(target, dtype=np.float64).ravel()
    if x.shape[0] == 0:
        raise DataError("cannot fit on an empty table")
    if x.shape[0] != y.shape[0]:
        raise DataError(f"{x.shape[0]} feature rows but {y.shape[0]} targets")
    if not np.all(np.isfinite(y)):
        raise DataError("target contains non-finite values")
    n = x.shape[0]
    rng = np.random.default_rng(cfg.seed)
    order = np.argsort(x, axis=0, kind="stable")
    # clamped so a constant target is reproduced exactly
    base = min(max(math.fsum(y) / n, float(y.min())), float(y.max()))
    pred = np.full(n, base)
    trees = []
    losses = [float(np.sum((y - pred) ** 2))]
    all_rows = np.arange(n)
    n_sub = max(1, int(round(cfg.subsample * n)))
    for _ in range(cfg.n_trees):
        resid = y - pred
        rows = all_rows if n_sub == n else np.sort(rng.choice(n, n_sub, replace=False))
        tree = _fit_tree(x, order, resid, rows, cfg.max_depth, cfg.min_samples_leaf)
        trees.append(tree)
        pred = pred + cfg.learning_rate * tree.predict(x)
        losses.append(float(np.sum((y - pred) ** 2)))
    return GbmModel(base, cfg.learning_rate, tuple(trees), x.shape[1], tuple(losses))


def gbm_predict(model: GbmModel, features) -> np.ndarray:
    x = as_matrix(features)
    if x.shape[1] != model.n_features:
        raise DataError(f"model expects {model.n_features} features, got {x.shape[1]}")
    out = np.full(x.shape[0], model.base_prediction)
    for tree in model.trees:
        out += model.learning_rate * tree.predict(x)
    return out


def r_squared(y_true, y_pred) -> float:
    y = np.asarray(y_true, dtype=np.float64).ravel()
    yh = np.asarray(y_pred, dtype=np.float64).ravel()
    if y.size == 0 or y.size != yh.size:
        raise DataError("r_squared needs equal, non-zero lengths")
    u = float(np.sum((y - yh) ** 2))
    v = float(np.sum((y - y.mean()) ** 2))
    if v == 0.0:
        raise NumericError("undefined R²: y_true is constant")
    return 1.0 - u / v


@dataclass(frozen=True)
class DownstreamResult:
    tr_tr: float
    tr_syn: float
    tr_te: float
    syn_syn: float
    syn_tr: float
    syn_te: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DownstreamModel:
    """A boosting model plus the encoder fitted on its training table."""

    target: str
    encoder: object
    model: GbmModel

    def score(self, t: DataTable) -> float:
        x = encode(t, self.encoder)
        return r_squared(t.column(self.target), gbm_predict(self.model, x))


def fit_downstream_model(t: DataTable, target: str, cfg: GbmConfig = GbmConfig()) -> DownstreamModel:
    """Fit on every column of ``t`` except ``target`` (encoder fitted on ``t``)."""
    if target not in t.schema:
        raise DataError(f"target column {target!r} absent from table")
    features = [n for n in t.schema.names if n != target]
    enc = fit_encoder(t, features)
    return DownstreamModel(target, enc, gbm_fit(encode(t, enc), t.column(target), cfg))


def downstream_suite(
    train: DataTable,
    holdout: DataTable,
    synth: DataTable,
    target: str,
    cfg: GbmConfig = GbmConfig(),
    *,
    fit_hook: Callable[[str, DataTable], None] | None = None,
) -> DownstreamResult:
    """Six train/predict R² combinations.

    ``fit_hook(source, table)`` is called with the exact table each model is
    fitted on, so callers can audit that holdout rows never reach a fit.
    """
    for name, t in (("train", train), ("holdout", holdout), ("synthetic", synth)):
        if target not in t.schema:
            raise DataError(f"target column {target!r} absent from {name} table")
    if fit_hook is not None:
        fit_hook("train", train)
    m_tr = fit_downstream_model(train, target, cfg)
    if fit_hook is not None:
        fit_hook("synthetic", synth)
    m_sy = fit_downstream_model(synth, target, cfg)
    return DownstreamResult(
        tr_tr=m_tr.score(train),
        tr_syn=m_tr.score(synth),
        tr_te=m_tr.score(holdout),
        syn_syn=m_sy.score(synth),
        syn_tr=m_sy.score(train),
        syn_te=m_sy.score(holdout),
    )
