"""Second-order gradient tree boosting with a softmax multiclass objective.

One depth-limited regression tree per class per round, fit on the gradient
and hessian of the multiclass cross-entropy at the current logits. Split
finding is exact greedy over every (feature, midpoint-between-sorted-values)
candidate; no histogramming, subsampling, or sparsity handling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .dataset import FeatureTable

FORMAT_VERSION = 1

# relative window within which candidate split gains count as tied
GAIN_TIE_TOL = 1e-9


@dataclass(frozen=True)
class GbtConfig:
    n_rounds: int = 100
    max_depth: int = 6
    learning_rate: float = 0.3
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_hessian: float = 1.0
    n_classes: int = 3
    base_score: float = 0.0  # uniform logits

    def __post_init__(self):
        # 0 is allowed so a no-learning ensemble stays at the base score
        if not 0.0 <= self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in [0, 1]")
        if self.reg_lambda < 0 or self.gamma < 0:
            raise ValueError("reg_lambda and gamma must be non-negative")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")


def softmax_grad_hess(logits: np.ndarray, labels: np.ndarray):
    """Per-row per-class gradient p - y and hessian p(1 - p) of the
    multiclass cross-entropy."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    shifted = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(shifted)
    p /= p.sum(axis=1, keepdims=True)
    g = p.copy()
    g[np.arange(labels.size), labels] -= 1.0
    h = p * (1.0 - p)
    return g, h


def leaf_weight(grad_sum: float, hess_sum: float, reg_lambda: float) -> float:
    """Closed-form second-order leaf value -G / (H + lambda)."""
    denom = hess_sum + reg_lambda
    if denom <= 0:
        raise ValueError("hessian sum plus lambda must be positive")
    return -grad_sum / denom


@dataclass(frozen=True)
class SplitDecision:
    feature: int
    threshold: float
    gain: float


def find_best_split(
    features: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    reg_lambda: float,
    gamma: float,
    min_child_hessian: float = 0.0,
) -> SplitDecision | None:
    """Exact greedy search maximizing
    0.5 * (GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)) - gamma.

    Candidates are midpoints between consecutive distinct sorted values of
    each feature; rows with x <= threshold go left. Ties break toward the
    lowest feature index, then the lowest threshold; gains within 1e-9
    (relative) of the maximum count as tied, so mathematically equal
    candidates resolve identically regardless of summation order. Returns
    None when the best gain is not positive.
    """
    x = np.asarray(features, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        return None
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    gl = np.cumsum(g[order], axis=0)[:-1]
    hl = np.cumsum(h[order], axis=0)[:-1]
    g_tot = g.sum()
    h_tot = h.sum()
    gr = g_tot - gl
    hr = h_tot - hl

    mids = 0.5 * (xs[:-1] + xs[1:])
    # a boundary is usable when the midpoint separates the two sides exactly
    valid = (xs[1:] > xs[:-1]) & (mids < xs[1:])
    if min_child_hessian > 0.0:
        valid &= (hl >= min_child_hessian) & (hr >= min_child_hessian)

    with np.errstate(divide="ignore", invalid="ignore"):
        parent = g_tot * g_tot / (h_tot + reg_lambda)
        gain = 0.5 * (gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent) - gamma
    gain[~valid | ~np.isfinite(gain)] = -np.inf

    flat = gain.T.reshape(-1)  # feature-major, thresholds ascending per feature
    best_val = flat.max()
    if not best_val > 0.0:
        return None
    tol = GAIN_TIE_TOL * max(1.0, abs(best_val))
    idx = int(np.argmax(flat >= best_val - tol))
    j, i = divmod(idx, n - 1)
    chosen = float(flat[idx])
    if chosen <= 0.0:
        return None
    return SplitDecision(feature=j, threshold=float(mids[i, j]), gain=chosen)


@dataclass
class RegressionTree:
    """Flat binary tree: feature[i] < 0 marks node i as a leaf with value[i];
    otherwise rows with x[:, feature[i]] <= threshold[i] go to left[i]."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        idx = np.zeros(x.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[idx]
            active = feat >= 0
            if not active.any():
                break
            cols = np.where(active, feat, 0)
            go_left = x[np.arange(x.shape[0]), cols] <= self.threshold[idx]
            nxt = np.where(go_left, self.left[idx], self.right[idx])
            idx = np.where(active, nxt, idx)
        return self.value[idx]

    @property
    def n_nodes(self) -> int:
        return self.feature.size


class _TreeBuilder:
    def __init__(self, cfg: GbtConfig):
        self.cfg = cfg
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def build(self, x: np.ndarray, g: np.ndarray, h: np.ndarray, depth: int) -> int:
        node = self._new_node()
        split = None
        if depth < self.cfg.max_depth and x.shape[0] >= 2:
            split = find_best_split(
                x, g, h, self.cfg.reg_lambda, self.cfg.gamma, self.cfg.min_child_hessian
            )
        if split is None:
            self.value[node] = leaf_weight(g.sum(), h.sum(), self.cfg.reg_lambda)
            return node
        mask = x[:, split.feature] <= split.threshold
        self.feature[node] = split.feature
        self.threshold[node] = split.threshold
        self.left[node] = self.build(x[mask], g[mask], h[mask], depth + 1)
        self.right[node] = self.build(x[~mask], g[~mask], h[~mask], depth + 1)
        return node

    def finish(self) -> RegressionTree:
        return RegressionTree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            value=np.asarray(self.value, dtype=np.float64),
        )


def _fit_tree(x: np.ndarray, g: np.ndarray, h: np.ndarray, cfg: GbtConfig) -> RegressionTree:
    builder = _TreeBuilder(cfg)
    builder.build(x, g, h, depth=0)
    return builder.finish()


def multiclass_log_loss(logits: np.ndarray, labels: np.ndarray) -> float:
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    return float(np.mean(lse - shifted[np.arange(labels.size), labels]))


@dataclass
class BoostedEnsemble:
    """n_rounds * n_classes regression trees plus the training loss curve."""

    config: GbtConfig
    n_features: int = 0
    trees: list[list[RegressionTree]] = field(default_factory=list)  # [round][class]
    train_loss: list[float] = field(default_factory=list)

    @property
    def n_trees(self) -> int:
        return sum(len(r) for r in self.trees)


def fit_gbt(train: FeatureTable, cfg: GbtConfig | None = None) -> BoostedEnsemble:
    """Boost for cfg.n_rounds rounds, one tree per class per round.

    Per round the gradient/hessian are evaluated once at the current logits,
    then logits accumulate learning_rate times each new tree's output. The
    multiclass log-loss after every round is recorded.
    """
    cfg = cfg or GbtConfig()
    if train.n_rows == 0:
        raise ValueError("training table is empty")
    x = np.asarray(train.features, dtype=np.float64)
    y = train.labels
    if y.max() >= cfg.n_classes:
        raise ValueError(f"labels outside [0, {cfg.n_classes})")
    ens = BoostedEnsemble(config=cfg, n_features=x.shape[1])
    logits = np.full((x.shape[0], cfg.n_classes), cfg.base_score, dtype=np.float64)
    for _ in range(cfg.n_rounds):
        g, h = softmax_grad_hess(logits, y)
        round_trees = []
        for c in range(cfg.n_classes):
            tree = _fit_tree(x, g[:, c], h[:, c], cfg)
            logits[:, c] += cfg.learning_rate * tree.predict(x)
            round_trees.append(tree)
        ens.trees.append(round_trees)
        ens.train_loss.append(multiclass_log_loss(logits, y))
    return ens


def decision_scores(ens: BoostedEnsemble, features: np.ndarray) -> np.ndarray:
    """Summed per-class logits: base score plus learning_rate times every
    tree's output."""
    x = np.asarray(features, dtype=np.float64)
    if ens.n_features and x.shape[1] != ens.n_features:
        raise ValueError(f"table has {x.shape[1]} features, ensemble expects {ens.n_features}")
    cfg = ens.config
    logits = np.full((x.shape[0], cfg.n_classes), cfg.base_score, dtype=np.float64)
    for round_trees in ens.trees:
        for c, tree in enumerate(round_trees):
            logits[:, c] += cfg.learning_rate * tree.predict(x)
    return logits


def predict_gbt(ens: BoostedEnsemble, table: FeatureTable):
    """(probs, labels): softmax over summed tree outputs, argmax labels with
    lowest-index tie-break."""
    logits = decision_scores(ens, table.features)
    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    return probs, probs.argmax(axis=1)


def _tree_to_doc(tree: RegressionTree, node: int = 0) -> dict:
    """Preorder nested dump."""
    if tree.feature[node] < 0:
        return {"leaf": tree.value[node]}
    return {
        "feature": int(tree.feature[node]),
        "threshold": tree.threshold[node],
        "left": _tree_to_doc(tree, int(tree.left[node])),
        "right": _tree_to_doc(tree, int(tree.right[node])),
    }


def _tree_from_doc(doc: dict) -> RegressionTree:
    builder = _TreeBuilder(GbtConfig())

    def walk(node_doc: dict) -> int:
        node = builder._new_node()
        if "leaf" in node_doc:
            builder.value[node] = float(node_doc["leaf"])
            return node
        builder.feature[node] = int(node_doc["feature"])
        builder.threshold[node] = float(node_doc["threshold"])
        builder.left[node] = walk(node_doc["left"])
        builder.right[node] = walk(node_doc["right"])
        return node

    walk(doc)
    return builder.finish()


def save_gbt(ens: BoostedEnsemble, path) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "config": asdict(ens.config),
        "n_features": ens.n_features,
        "train_loss": ens.train_loss,
        "trees": [[_tree_to_doc(t) for t in rnd] for rnd in ens.trees],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_gbt(path) -> BoostedEnsemble:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported ensemble format: {doc.get('format_version')!r}")
    cfg = GbtConfig(**doc["config"])
    ens = BoostedEnsemble(
        config=cfg, n_features=int(doc.get("n_features", 0)), train_loss=list(doc["train_loss"])
    )
    ens.trees = [[_tree_from_doc(t) for t in rnd] for rnd in doc["trees"]]
    return ens
