"""The comparison field: classic classifiers behind one fit/predict
interface, next to the convolutional network, the booster alone, and the
fused network-plus-booster combination.

Every method returns class scores on the probability simplex and argmax
labels with a lowest-index tie-break, and is deterministic under a fixed
seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .dataset import FeatureTable
from .gbt import BoostedEnsemble, GbtConfig, fit_gbt, predict_gbt
from .nn import CnnConfig, CnnModel, build_cnn, extract_embeddings, predict_proba, train_cnn

BASELINE_METHODS = (
    "cnn",
    "mlp",
    "gbt_alone",
    "adaboost",
    "random_forest",
    "decision_tree",
    "naive_bayes",
    "logistic_regression",
    "fused",
)

N_CLASSES = 3


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 16
    min_samples_leaf: int = 1


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 16
    min_samples_leaf: int = 1
    max_features: str | int | None = "sqrt"
    bootstrap: bool = True


@dataclass(frozen=True)
class AdaBoostConfig:
    n_rounds: int = 50


@dataclass(frozen=True)
class NaiveBayesConfig:
    var_floor: float = 1e-9


@dataclass(frozen=True)
class LogisticConfig:
    learning_rate: float = 0.1
    tol: float = 1e-6
    max_iter: int = 5000


@dataclass(frozen=True)
class BaselinesConfig:
    tree: TreeConfig = field(default_factory=TreeConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    adaboost: AdaBoostConfig = field(default_factory=AdaBoostConfig)
    naive_bayes: NaiveBayesConfig = field(default_factory=NaiveBayesConfig)
    logistic: LogisticConfig = field(default_factory=LogisticConfig)
    nn: CnnConfig = field(default_factory=CnnConfig)
    gbt: GbtConfig = field(default_factory=GbtConfig)
    tap: str = "output"


@dataclass
class BaselineModel:
    method: str
    payload: Any


# ---------------------------------------------------------------------------
# CART with Gini impurity (shared by decision_tree and random_forest)
# ---------------------------------------------------------------------------


@dataclass
class ClassificationTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    proba: np.ndarray  # (n_nodes, n_classes), leaf rows are class fractions

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
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
        return self.proba[idx]


def _gini_best_split(x: np.ndarray, onehot: np.ndarray, min_leaf: int):
    """Best (feature, threshold, impurity decrease) by exact search; ties go
    to the lowest feature index, then the lowest threshold. Zero-decrease
    splits are allowed (matching common CART behavior), so axis-aligned
    XOR-style layouts still split."""
    n = x.shape[0]
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    # cum[i, j, c]: count of class c among the first i+1 rows of feature j's order
    cum = np.cumsum(onehot[order], axis=0)[:-1]
    left_n = np.arange(1, n, dtype=np.float64)[:, None]
    right_n = n - left_n
    total = onehot.sum(axis=0)
    gini_left = 1.0 - ((cum / left_n[:, :, None]) ** 2).sum(axis=2)
    gini_right = 1.0 - (((total - cum) / right_n[:, :, None]) ** 2).sum(axis=2)
    gini_parent = 1.0 - ((total / n) ** 2).sum()
    decrease = gini_parent - (left_n / n) * gini_left - (right_n / n) * gini_right

    mids = 0.5 * (xs[:-1] + xs[1:])
    valid = (xs[1:] > xs[:-1]) & (mids < xs[1:])
    if min_leaf > 1:
        counts = np.arange(1, n)[:, None]
        valid &= (counts >= min_leaf) & ((n - counts) >= min_leaf)
    decrease = np.where(valid, decrease, -np.inf)

    best = None
    for j in range(x.shape[1]):
        col = decrease[:, j]
        i = int(np.argmax(col))
        if col[i] == -np.inf:
            continue
        if best is None or col[i] > best[2]:
            best = (j, float(mids[i, j]), float(col[i]))
    if best is None or best[2] < 0.0:
        return None
    return best


class _CartBuilder:
    def __init__(self, cfg: TreeConfig, rng: np.random.Generator | None, max_features: int | None):
        self.cfg = cfg
        self.rng = rng
        self.max_features = max_features
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.proba: list[np.ndarray] = []

    def _new_node(self, counts: np.ndarray) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.proba.append(counts / counts.sum())
        return len(self.feature) - 1

    def build(self, x: np.ndarray, onehot: np.ndarray, depth: int) -> int:
        counts = onehot.sum(axis=0)
        node = self._new_node(counts)
        if depth >= self.cfg.max_depth or x.shape[0] < max(2, 2 * self.cfg.min_samples_leaf):
            return node
        if (counts > 0).sum() <= 1:  # pure node
            return node
        d = x.shape[1]
        if self.max_features is not None and self.max_features < d:
            subset = np.sort(self.rng.choice(d, size=self.max_features, replace=False))
            found = _gini_best_split(x[:, subset], onehot, self.cfg.min_samples_leaf)
            if found is not None:
                found = (int(subset[found[0]]), found[1], found[2])
        else:
            found = _gini_best_split(x, onehot, self.cfg.min_samples_leaf)
        if found is None:
            return node
        j, thr, _ = found
        mask = x[:, j] <= thr
        self.feature[node] = j
        self.threshold[node] = thr
        self.left[node] = self.build(x[mask], onehot[mask], depth + 1)
        self.right[node] = self.build(x[~mask], onehot[~mask], depth + 1)
        return node

    def finish(self) -> ClassificationTree:
        return ClassificationTree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            proba=np.vstack(self.proba),
        )


def _fit_cart(
    x: np.ndarray,
    y: np.ndarray,
    cfg: TreeConfig,
    rng: np.random.Generator | None = None,
    max_features: int | None = None,
) -> ClassificationTree:
    onehot = np.zeros((y.size, N_CLASSES), dtype=np.float64)
    onehot[np.arange(y.size), y] = 1.0
    builder = _CartBuilder(cfg, rng, max_features)
    builder.build(x, onehot, depth=0)
    return builder.finish()


# ---------------------------------------------------------------------------
# AdaBoost (SAMME) on depth-1 stumps
# ---------------------------------------------------------------------------


@dataclass
class Stump:
    feature: int
    threshold: float
    class_left: int
    class_right: int

    def predict(self, x: np.ndarray) -> np.ndarray:
        go_left = x[:, self.feature] <= self.threshold
        return np.where(go_left, self.class_left, self.class_right)


def best_weighted_stump(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> Stump:
    """Exhaustive minimum-weighted-error stump. Each side predicts its
    weighted-majority class; ties break toward the lowest feature index,
    lowest threshold, then lowest class index."""
    n, d = x.shape
    wc = np.zeros((n, N_CLASSES), dtype=np.float64)
    wc[np.arange(n), y] = w
    total = wc.sum(axis=0)
    best = None
    for j in range(d):
        order = np.argsort(x[:, j], kind="stable")
        xs = x[order, j]
        cum = np.cumsum(wc[order], axis=0)[:-1]
        mids = 0.5 * (xs[:-1] + xs[1:])
        valid = (xs[1:] > xs[:-1]) & (mids < xs[1:])
        if not valid.any():
            continue
        left_best = cum.max(axis=1)
        right_best = (total - cum).max(axis=1)
        correct = np.where(valid, left_best + right_best, -np.inf)
        i = int(np.argmax(correct))
        if correct[i] == -np.inf:
            continue
        if best is None or correct[i] > best[0]:
            best = (
                float(correct[i]),
                j,
                float(mids[i]),
                int(np.argmax(cum[i])),
                int(np.argmax(total - cum[i])),
            )
    if best is None:
        # all features constant: predict the weighted-majority class everywhere
        c = int(np.argmax(total))
        return Stump(feature=0, threshold=np.inf, class_left=c, class_right=c)
    _, j, thr, cl, cr = best
    return Stump(feature=j, threshold=thr, class_left=cl, class_right=cr)


@dataclass
class AdaBoostModel:
    stumps: list[Stump]
    alphas: list[float]


def _fit_adaboost(x: np.ndarray, y: np.ndarray, cfg: AdaBoostConfig) -> AdaBoostModel:
    n = x.shape[0]
    w = np.full(n, 1.0 / n)
    stumps: list[Stump] = []
    alphas: list[float] = []
    for _ in range(cfg.n_rounds):
        stump = best_weighted_stump(x, y, w)
        pred = stump.predict(x)
        miss = pred != y
        err = float(w[miss].sum())
        if err >= 1.0 - 1.0 / N_CLASSES:  # no better than chance: stop
            break
        if err <= 0.0:
            alphas.append(np.log((1.0 - 1e-12) / 1e-12) + np.log(N_CLASSES - 1.0))
            stumps.append(stump)
            break
        alpha = np.log((1.0 - err) / err) + np.log(N_CLASSES - 1.0)
        stumps.append(stump)
        alphas.append(alpha)
        w *= np.exp(alpha * miss)
        w /= w.sum()
    if not stumps:
        stumps = [best_weighted_stump(x, y, np.full(n, 1.0 / n))]
        alphas = [1.0]
    return AdaBoostModel(stumps=stumps, alphas=alphas)


def _adaboost_scores(model: AdaBoostModel, x: np.ndarray) -> np.ndarray:
    votes = np.zeros((x.shape[0], N_CLASSES), dtype=np.float64)
    for stump, alpha in zip(model.stumps, model.alphas):
        pred = stump.predict(x)
        votes[np.arange(x.shape[0]), pred] += alpha
    return votes / votes.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Gaussian naive Bayes and multinomial logistic regression
# ---------------------------------------------------------------------------


@dataclass
class NaiveBayesModel:
    log_prior: np.ndarray
    means: np.ndarray  # (n_classes, n_features)
    variances: np.ndarray


def _fit_naive_bayes(x: np.ndarray, y: np.ndarray, cfg: NaiveBayesConfig) -> NaiveBayesModel:
    means = np.zeros((N_CLASSES, x.shape[1]))
    variances = np.ones((N_CLASSES, x.shape[1]))
    log_prior = np.full(N_CLASSES, -np.inf)
    for c in range(N_CLASSES):
        rows = x[y == c]
        if rows.shape[0] == 0:
            continue
        log_prior[c] = np.log(rows.shape[0] / x.shape[0])
        means[c] = rows.mean(axis=0)
        variances[c] = np.maximum(rows.var(axis=0), cfg.var_floor)
    return NaiveBayesModel(log_prior=log_prior, means=means, variances=variances)


def _naive_bayes_scores(model: NaiveBayesModel, x: np.ndarray) -> np.ndarray:
    log_joint = np.empty((x.shape[0], N_CLASSES))
    for c in range(N_CLASSES):
        diff = x - model.means[c]
        log_lik = -0.5 * (
            (diff * diff) / model.variances[c] + np.log(2.0 * np.pi * model.variances[c])
        ).sum(axis=1)
        log_joint[:, c] = model.log_prior[c] + log_lik
    shifted = log_joint - log_joint.max(axis=1, keepdims=True)
    p = np.exp(shifted)
    return p / p.sum(axis=1, keepdims=True)


@dataclass
class LogisticModel:
    weights: np.ndarray  # (n_features + 1, n_classes), last row is the bias
    n_iter: int


def _fit_logistic(x: np.ndarray, y: np.ndarray, cfg: LogisticConfig) -> LogisticModel:
    """Full-batch gradient descent on the multinomial cross-entropy, stopped
    when the gradient infinity-norm drops below tol."""
    n = x.shape[0]
    xb = np.hstack([x, np.ones((n, 1))])
    onehot = np.zeros((n, N_CLASSES))
    onehot[np.arange(n), y] = 1.0
    weights = np.zeros((xb.shape[1], N_CLASSES))
    n_iter = 0
    for n_iter in range(1, cfg.max_iter + 1):
        logits = xb @ weights
        shifted = logits - logits.max(axis=1, keepdims=True)
        p = np.exp(shifted)
        p /= p.sum(axis=1, keepdims=True)
        grad = xb.T @ (p - onehot) / n
        if np.abs(grad).max() < cfg.tol:
            break
        weights -= cfg.learning_rate * grad
    return LogisticModel(weights=weights, n_iter=n_iter)


def _logistic_scores(model: LogisticModel, x: np.ndarray) -> np.ndarray:
    xb = np.hstack([x, np.ones((x.shape[0], 1))])
    logits = xb @ model.weights
    shifted = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(shifted)
    return p / p.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Unified interface
# ---------------------------------------------------------------------------


def _seed_int(seed: int, salt: int) -> int:
    return int(np.random.SeedSequence([seed, salt]).generate_state(1)[0])


def fit_baseline(
    method: str,
    train: FeatureTable,
    cfg: BaselinesConfig | None = None,
    seed: int = 0,
    val: FeatureTable | None = None,
) -> BaselineModel:
    """Train the named method on an (already preprocessed) table."""
    cfg = cfg or BaselinesConfig()
    if method not in BASELINE_METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {BASELINE_METHODS}")
    x = np.asarray(train.features, dtype=np.float64)
    y = train.labels
    discriminative = (
        "decision_tree", "random_forest", "adaboost", "logistic_regression",
        "mlp", "cnn", "fused",
    )
    if method in discriminative and np.unique(y).size < 2:
        raise ValueError(f"{method} needs at least two classes in the training data")

    if method == "decision_tree":
        return BaselineModel(method, _fit_cart(x, y, cfg.tree))

    if method == "random_forest":
        fc = cfg.forest
        if fc.max_features is None:
            max_features = None
        elif fc.max_features == "sqrt":
            max_features = max(int(np.sqrt(x.shape[1])), 1)
        else:
            max_features = int(fc.max_features)
        tree_cfg = TreeConfig(max_depth=fc.max_depth, min_samples_leaf=fc.min_samples_leaf)
        trees = []
        for t in range(fc.n_trees):
            rng = np.random.default_rng(np.random.SeedSequence([seed, 11, t]))
            if fc.bootstrap:
                idx = rng.integers(0, x.shape[0], x.shape[0])
                xt, yt = x[idx], y[idx]
            else:
                xt, yt = x, y
            trees.append(_fit_cart(xt, yt, tree_cfg, rng=rng, max_features=max_features))
        return BaselineModel(method, trees)

    if method == "adaboost":
        return BaselineModel(method, _fit_adaboost(x, y, cfg.adaboost))

    if method == "naive_bayes":
        return BaselineModel(method, _fit_naive_bayes(x, y, cfg.naive_bayes))

    if method == "logistic_regression":
        return BaselineModel(method, _fit_logistic(x, y, cfg.logistic))

    if method in ("cnn", "mlp"):
        nn_cfg = replace(
            cfg.nn,
            input_length=train.n_features,
            conv_filters=() if method == "mlp" else cfg.nn.conv_filters,
        )
        model = build_cnn(nn_cfg, seed=_seed_int(seed, 23))
        model, _ = train_cnn(model, train, val, nn_cfg)
        return BaselineModel(method, model)

    if method == "gbt_alone":
        return BaselineModel(method, fit_gbt(train, cfg.gbt))

    # fused: network embeddings feeding the booster
    nn_cfg = replace(cfg.nn, input_length=train.n_features)
    net = build_cnn(nn_cfg, seed=_seed_int(seed, 23))
    net, _ = train_cnn(net, train, val, nn_cfg)
    embedded = extract_embeddings(net, train, cfg.tap)
    booster = fit_gbt(embedded, cfg.gbt)
    return BaselineModel(method, (net, booster, cfg.tap))


def predict_baseline(model: BaselineModel, table: FeatureTable):
    """(scores, labels) for any fitted baseline; scores lie on the simplex
    and labels are the argmax with the lowest-index tie-break."""
    x = np.asarray(table.features, dtype=np.float64)
    method = model.method
    if method == "decision_tree":
        scores = model.payload.predict_proba(x)
    elif method == "random_forest":
        votes = np.zeros((x.shape[0], N_CLASSES))
        for tree in model.payload:
            pred = tree.predict_proba(x).argmax(axis=1)
            votes[np.arange(x.shape[0]), pred] += 1.0
        scores = votes / len(model.payload)
    elif method == "adaboost":
        scores = _adaboost_scores(model.payload, x)
    elif method == "naive_bayes":
        scores = _naive_bayes_scores(model.payload, x)
    elif method == "logistic_regression":
        scores = _logistic_scores(model.payload, x)
    elif method in ("cnn", "mlp"):
        scores = predict_proba(model.payload, x)
    elif method == "gbt_alone":
        scores, _ = predict_gbt(model.payload, table)
    elif method == "fused":
        net, booster, tap = model.payload
        embedded = extract_embeddings(net, table, tap)
        scores, _ = predict_gbt(booster, embedded)
    else:
        raise ValueError(f"unknown method {method!r}")
    return scores, scores.argmax(axis=1)
