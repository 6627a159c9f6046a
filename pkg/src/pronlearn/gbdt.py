"""Gradient-boosted decision trees with logistic loss over pooled
phoneme-embedding pair features, built from scratch.

Each boosting round fits a regression tree to the negative gradients of the
logistic loss (label minus predicted probability) with exact greedy splits;
leaf values are Newton steps (gradient sum over hessian sum).  Splits
tie-break on lowest feature index, then lowest threshold, so training is
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GbdtError(ValueError):
    pass


def build_features(user_emb: np.ndarray, tts_emb: np.ndarray, k: int = 4) -> np.ndarray:
    """Reduce two (len x E) embedding sequences to one fixed vector of length
    2*E*k: each sequence is zero-padded up to k rows if shorter, split into k
    equal-width segments, segment rows are mean-pooled, and the user block
    comes first."""
    user_emb = np.asarray(user_emb, dtype=np.float64)
    tts_emb = np.asarray(tts_emb, dtype=np.float64)
    if user_emb.ndim != 2 or tts_emb.ndim != 2:
        raise GbdtError("embeddings must be 2-D (len x E) matrices")
    if user_emb.shape[1] != tts_emb.shape[1]:
        raise GbdtError(
            f"embedding width mismatch: {user_emb.shape[1]} vs {tts_emb.shape[1]}")
    return np.concatenate([_pool(user_emb, k), _pool(tts_emb, k)])


def _pool(emb: np.ndarray, k: int) -> np.ndarray:
    n, e = emb.shape
    if n < k:
        emb = np.vstack([emb, np.zeros((k - n, e))])
        n = k
    bounds = [(i * n) // k for i in range(k + 1)]
    return np.concatenate([emb[bounds[i]:bounds[i + 1]].mean(axis=0) for i in range(k)])


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class Tree:
    nodes: list[TreeNode] = field(default_factory=list)

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        feats = np.array([n.feature for n in self.nodes])
        thr = np.array([n.threshold for n in self.nodes])
        left = np.array([n.left for n in self.nodes])
        right = np.array([n.right for n in self.nodes])
        vals = np.array([n.value for n in self.nodes])
        idx = np.zeros(x.shape[0], dtype=np.int64)
        rows = np.flatnonzero(feats[idx] >= 0)
        while rows.size:
            cur = idx[rows]
            go_left = x[rows, feats[cur]] < thr[cur]
            idx[rows] = np.where(go_left, left[cur], right[cur])
            rows = rows[feats[idx[rows]] >= 0]
        return vals[idx]


@dataclass
class GbdtModel:
    trees: list[Tree]
    shrinkage: float
    base_score: float
    n_features: int
    train_log: list[float] = field(default_factory=list)


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-z)), np.exp(z) / (1.0 + np.exp(z)))


def _log_loss(labels: np.ndarray, probs: np.ndarray) -> float:
    p = np.clip(probs, 1e-12, 1 - 1e-12)
    return float(-(labels * np.log(p) + (1 - labels) * np.log(1 - p)).mean())


def _best_split(x, grad, hess, rows):
    """Exact greedy split of ``rows`` maximizing gain, vectorized over all
    features at once; returns (gain, feature, threshold) or None."""
    sub = x[rows]                      # (n, F)
    g, h = grad[rows], hess[rows]
    n, n_feat = sub.shape
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    gs = np.cumsum(g[order], axis=0)
    hs = np.cumsum(h[order], axis=0)
    g_tot, h_tot = gs[-1], hs[-1]
    eps = 1e-12
    parent = (g_tot ** 2) / (h_tot + eps)
    # candidate split after position i (left = first i+1 sorted rows)
    gl, hl = gs[:-1], hs[:-1]
    gr, hr = g_tot - gl, h_tot - hl
    gain = gl ** 2 / (hl + eps) + gr ** 2 / (hr + eps) - parent
    valid = xs[:-1] < xs[1:]           # no split between equal values
    gain = np.where(valid, gain, -np.inf)
    if not np.any(np.isfinite(gain)) or gain.size == 0:
        return None
    # deterministic tie-break: max gain, then lowest feature, then lowest threshold
    best_per_feat = gain.max(axis=0)
    feature = int(np.argmax(best_per_feat > best_per_feat.max() - 1e-15))
    col_gain = gain[:, feature]
    top = col_gain.max()
    if top <= 1e-12:
        return None
    pos_candidates = np.flatnonzero(col_gain >= top - 1e-15)
    pos = int(pos_candidates[0])
    threshold = 0.5 * (xs[pos, feature] + xs[pos + 1, feature])
    return float(top), feature, float(threshold)


def _fit_tree(x, grad, hess, max_depth: int) -> Tree:
    tree = Tree()

    def leaf(rows) -> int:
        value = grad[rows].sum() / (hess[rows].sum() + 1e-12)
        tree.nodes.append(TreeNode(value=value))
        return len(tree.nodes) - 1

    def grow(rows, depth) -> int:
        if depth >= max_depth or rows.size < 2:
            return leaf(rows)
        found = _best_split(x, grad, hess, rows)
        if found is None:
            return leaf(rows)
        _, feature, threshold = found
        node_id = len(tree.nodes)
        tree.nodes.append(TreeNode(feature=feature, threshold=threshold))
        mask = x[rows, feature] < threshold
        left = grow(rows[mask], depth + 1)
        right = grow(rows[~mask], depth + 1)
        tree.nodes[node_id].left = left
        tree.nodes[node_id].right = right
        return node_id

    grow(np.arange(x.shape[0]), 0)
    return tree


def train_gbdt(features, labels, n_trees: int = 100, max_depth: int = 4,
               shrinkage: float = 0.1) -> GbdtModel:
    """Boost ``n_trees`` regression trees against logistic-loss gradients."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise GbdtError("features must be (n, F) with one label per row")
    if x.shape[0] < 2:
        raise GbdtError("need at least two training examples")
    if len(np.unique(y)) < 2:
        raise GbdtError("training labels must include both classes")
    prior = y.mean()
    base = float(np.log(prior / (1.0 - prior)))
    model = GbdtModel(trees=[], shrinkage=shrinkage, base_score=base,
                      n_features=x.shape[1])
    raw = np.full(x.shape[0], base)
    model.train_log.append(_log_loss(y, _sigmoid(raw)))
    for _ in range(n_trees):
        p = _sigmoid(raw)
        grad = y - p              # negative gradient of logistic loss
        hess = p * (1.0 - p)
        tree = _fit_tree(x, grad, hess, max_depth)
        model.trees.append(tree)
        raw = raw + shrinkage * tree.predict(x)
        model.train_log.append(_log_loss(y, _sigmoid(raw)))
    return model


def predict(model: GbdtModel, features) -> float | np.ndarray:
    """Probability of the positive (mispronounced) class."""
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.n_features:
        raise GbdtError(f"expected {model.n_features} features, got {x.shape[1]}")
    raw = np.full(x.shape[0], model.base_score)
    for tree in model.trees:
        raw += model.shrinkage * tree.predict(x)
    probs = _sigmoid(raw)
    return float(probs[0]) if single else probs


def save_gbdt(model: GbdtModel, path: str | Path) -> None:
    """Versioned text format: header, then one line per tree node."""
    lines = [
        "gbdt v1",
        f"base_score {float(model.base_score)!r}",
        f"shrinkage {float(model.shrinkage)!r}",
        f"n_features {model.n_features}",
        f"n_trees {len(model.trees)}",
    ]
    for t, tree in enumerate(model.trees):
        lines.append(f"tree {t} {len(tree.nodes)}")
        for i, node in enumerate(tree.nodes):
            if node.is_leaf:
                lines.append(f"leaf {i} {float(node.value)!r}")
            else:
                lines.append(f"node {i} {node.feature} {float(node.threshold)!r} "
                             f"{node.left} {node.right}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_gbdt(path: str | Path) -> GbdtModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "gbdt v1":
        raise GbdtError(f"{path}: not a gbdt v1 model file")
    header = {}
    pos = 1
    for _ in range(4):
        key, value = lines[pos].split(" ", 1)
        header[key] = value
        pos += 1
    model = GbdtModel(trees=[], shrinkage=float(header["shrinkage"]),
                      base_score=float(header["base_score"]),
                      n_features=int(header["n_features"]))
    for _ in range(int(header["n_trees"])):
        _, _, n_nodes = lines[pos].split()
        pos += 1
        tree = Tree()
        for _ in range(int(n_nodes)):
            parts = lines[pos].split()
            pos += 1
            if parts[0] == "leaf":
                tree.nodes.append(TreeNode(value=float(parts[2])))
            else:
                tree.nodes.append(TreeNode(feature=int(parts[2]),
                                           threshold=float(parts[3]),
                                           left=int(parts[4]), right=int(parts[5])))
        model.trees.append(tree)
    return model
