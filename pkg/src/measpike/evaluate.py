"""Metrics, confusion matrices, precision-recall curves, the k-fold
cross-validation driver, and the per-method comparison harness.

Multiclass metrics derive per-class TP/TN/FP/FN one-vs-rest from the
confusion matrix and apply the four standard formulas
(accuracy, precision, recall, F1) per class, aggregated by weighted, macro,
and micro averaging. The arithmetic runs on exact rationals, so identities
such as weighted recall == overall accuracy hold bit-for-bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .baselines import BaselinesConfig, fit_baseline, predict_baseline
from .dataset import FeatureTable, FoldPlan, materialize_fold, stratified_kfold
from .gbt import GbtConfig, fit_gbt, predict_gbt
from .nn import CnnConfig, build_cnn, extract_embeddings, train_cnn
from .preprocess import PreprocessConfig, apply_pipeline, fit_pipeline

AVERAGING_MODES = ("weighted", "macro", "micro")


def confusion_matrix(y_true, y_pred, n_classes: int = 3) -> np.ndarray:
    """cm[t][p] counts rows with true class t predicted as p."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred must have equal length")
    if y_true.size and (
        y_true.min() < 0 or y_true.max() >= n_classes or y_pred.min() < 0 or y_pred.max() >= n_classes
    ):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


@dataclass
class MetricsReport:
    """Overall accuracy, per-averaging-mode aggregates, and per-class values."""

    accuracy: float
    precision: dict[str, float]
    recall: dict[str, float]
    f1: dict[str, float]
    mode_accuracy: dict[str, float]
    per_class: dict[str, list[float]]  # accuracy / precision / recall / f1
    support: list[int]
    averaging: str = "weighted"
    train_seconds: float = float("nan")

    def summary(self) -> dict[str, float]:
        """The headline four numbers under the report's averaging mode."""
        return {
            "accuracy": self.accuracy,
            "precision": self.precision[self.averaging],
            "recall": self.recall[self.averaging],
            "f1": self.f1[self.averaging],
        }


def binary_counts_metrics(tp: int, tn: int, fp: int, fn: int) -> dict[str, float]:
    """Accuracy, precision, recall, and F1 from one binary count quadruple."""
    total = tp + tn + fp + fn
    acc = Fraction(tp + tn, total) if total else Fraction(0)
    prec = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
    rec = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else Fraction(0)
    return {"accuracy": float(acc), "precision": float(prec), "recall": float(rec), "f1": float(f1)}


def metrics_from_cm(cm: np.ndarray, averaging: str = "weighted") -> MetricsReport:
    """One-vs-rest metrics per class plus weighted/macro/micro aggregates.

    Zero-denominator per-class precision or recall is defined as 0. The
    weighted mode weights classes by true-class support.
    """
    if averaging not in AVERAGING_MODES:
        raise ValueError(f"averaging must be one of {AVERAGING_MODES}")
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    if total <= 0:
        raise ValueError("confusion matrix is empty")
    k = cm.shape[0]
    tp = [int(cm[c, c]) for c in range(k)]
    fn = [int(cm[c].sum()) - tp[c] for c in range(k)]
    fp = [int(cm[:, c].sum()) - tp[c] for c in range(k)]
    tn = [total - tp[c] - fn[c] - fp[c] for c in range(k)]
    support = [tp[c] + fn[c] for c in range(k)]

    def frac(num: int, den: int) -> Fraction:
        return Fraction(num, den) if den else Fraction(0)

    cls_acc = [frac(tp[c] + tn[c], total) for c in range(k)]
    cls_prec = [frac(tp[c], tp[c] + fp[c]) for c in range(k)]
    cls_rec = [frac(tp[c], tp[c] + fn[c]) for c in range(k)]
    cls_f1 = [
        2 * p * r / (p + r) if p + r else Fraction(0)
        for p, r in zip(cls_prec, cls_rec)
    ]

    weights = [Fraction(s, total) for s in support]
    k_frac = Fraction(1, k)

    def weighted(values):
        return sum(w * v for w, v in zip(weights, values))

    def macro(values):
        return sum(values) * k_frac

    micro_tp = sum(tp)
    micro_fp = sum(fp)
    micro_fn = sum(fn)
    micro_tn = sum(tn)
    micro_prec = frac(micro_tp, micro_tp + micro_fp)
    micro_rec = frac(micro_tp, micro_tp + micro_fn)
    micro_f1 = (
        2 * micro_prec * micro_rec / (micro_prec + micro_rec)
        if micro_prec + micro_rec
        else Fraction(0)
    )
    micro_acc = frac(micro_tp + micro_tn, micro_tp + micro_tn + micro_fp + micro_fn)

    accuracy = frac(sum(tp), total)
    return MetricsReport(
        accuracy=float(accuracy),
        precision={
            "weighted": float(weighted(cls_prec)),
            "macro": float(macro(cls_prec)),
            "micro": float(micro_prec),
        },
        recall={
            "weighted": float(weighted(cls_rec)),
            "macro": float(macro(cls_rec)),
            "micro": float(micro_rec),
        },
        f1={
            "weighted": float(weighted(cls_f1)),
            "macro": float(macro(cls_f1)),
            "micro": float(micro_f1),
        },
        mode_accuracy={
            "weighted": float(weighted(cls_acc)),
            "macro": float(macro(cls_acc)),
            "micro": float(micro_acc),
        },
        per_class={
            "accuracy": [float(v) for v in cls_acc],
            "precision": [float(v) for v in cls_prec],
            "recall": [float(v) for v in cls_rec],
            "f1": [float(v) for v in cls_f1],
        },
        support=support,
        averaging=averaging,
    )


@dataclass
class PrCurve:
    """One-vs-rest precision/recall over a descending threshold sweep of one
    class's score column."""

    class_index: int
    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    empty: bool = False


def pr_curve(y_true, scores: np.ndarray, class_index: int, n_thresholds: int = 200) -> PrCurve:
    """Thresholds are the distinct score values of the class (descending,
    thinned to at most n_thresholds); at each, the class is predicted
    wherever its score >= threshold."""
    if n_thresholds < 2:
        raise ValueError("n_thresholds must be at least 2")
    y_true = np.asarray(y_true, dtype=np.int64)
    s = np.asarray(scores, dtype=np.float64)[:, class_index]
    positive = y_true == class_index
    n_pos = int(positive.sum())
    if n_pos == 0:
        return PrCurve(
            class_index, np.empty(0), np.empty(0), np.empty(0), empty=True
        )
    uniq = np.unique(s)[::-1]
    if uniq.size > n_thresholds:
        pick = np.unique(np.round(np.linspace(0, uniq.size - 1, n_thresholds)).astype(int))
        uniq = uniq[pick]
    order = np.argsort(-s, kind="stable")
    cum_tp = np.cumsum(positive[order])
    sorted_desc = s[order]
    precision = np.empty(uniq.size)
    recall = np.empty(uniq.size)
    for i, thr in enumerate(uniq):
        n_pred = int(np.searchsorted(-sorted_desc, -thr, side="right"))
        tp = int(cum_tp[n_pred - 1]) if n_pred else 0
        precision[i] = tp / n_pred if n_pred else 0.0
        recall[i] = tp / n_pos
    return PrCurve(class_index, uniq, precision, recall)


@dataclass(frozen=True)
class PipelineSpec:
    """Which preprocessing and model stages cross_validate should run."""

    model: str = "fused"  # any BASELINE_METHODS entry
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    nn: CnnConfig = field(default_factory=CnnConfig)
    gbt: GbtConfig = field(default_factory=GbtConfig)
    baselines: BaselinesConfig = field(default_factory=BaselinesConfig)
    tap: str = "output"


@dataclass
class CvReport:
    k: int
    seed: int
    model: str
    fold_metrics: list[MetricsReport]
    fold_cms: list[np.ndarray]
    mean: dict[str, float]
    pooled_cm: np.ndarray
    oof_scores: np.ndarray  # out-of-fold class scores, aligned with oof_labels
    oof_labels: np.ndarray
    averaging: str = "weighted"

    @property
    def mean_accuracy(self) -> float:
        return self.mean["accuracy"]


def _mean_summary(reports: list[MetricsReport]) -> dict[str, float]:
    keys = ("accuracy", "precision", "recall", "f1")
    means = {key: float(np.mean([r.summary()[key] for r in reports])) for key in keys}
    means["train_seconds"] = float(np.mean([r.train_seconds for r in reports]))
    return means


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, 17, fold]).generate_state(1)[0])


def _run_fold(train, val, test, spec: PipelineSpec, fold_seed: int, fp):
    t0 = time.perf_counter()
    tr = apply_pipeline(fp, train)
    va = apply_pipeline(fp, val)
    te = apply_pipeline(fp, test)
    if spec.model == "fused":
        nn_cfg = replace(spec.nn, input_length=tr.n_features)
        net = build_cnn(nn_cfg, seed=fold_seed)
        net, _ = train_cnn(net, tr, va, nn_cfg)
        emb_tr = extract_embeddings(net, tr, spec.tap)
        ens = fit_gbt(emb_tr, spec.gbt)
        seconds = time.perf_counter() - t0
        emb_te = extract_embeddings(net, te, spec.tap)
        scores, pred = predict_gbt(ens, emb_te)
    else:
        cfg = replace(spec.baselines, nn=spec.nn, gbt=spec.gbt, tap=spec.tap)
        model = fit_baseline(spec.model, tr, cfg, seed=fold_seed, val=va)
        seconds = time.perf_counter() - t0
        scores, pred = predict_baseline(model, te)
    return scores, pred, seconds


def fold_preprocessors(
    table: FeatureTable, plan: FoldPlan, cfg: PreprocessConfig
) -> list:
    """Fit preprocessing per fold on the training rows only, or once on the
    whole table in paper-faithful mode (shared by every fold)."""
    if cfg.paper_faithful:
        shared = fit_pipeline(table, cfg)
        return [shared] * plan.k
    fps = []
    for i in range(plan.k):
        train, _, _ = materialize_fold(table, plan, i)
        try:
            fps.append(fit_pipeline(train, cfg))
        except Exception as exc:
            raise RuntimeError(f"fold {i} failed in stage 'preprocess': {exc}") from exc
    return fps


def cross_validate(
    table: FeatureTable,
    spec: PipelineSpec | None = None,
    k: int = 10,
    seed: int = 0,
    plan: FoldPlan | None = None,
    preprocessors: list | None = None,
) -> CvReport:
    """Stratified k-fold evaluation of the configured pipeline.

    Per fold: preprocessing is fit on the training rows (or once on the full
    table when paper_faithful is set), the model trains on train/val, and
    metrics come from the held-out test fold. Scores of every row's own test
    fold are pooled for PR curves.
    """
    spec = spec or PipelineSpec()
    plan = plan or stratified_kfold(table, k, seed)
    if preprocessors is None:
        preprocessors = fold_preprocessors(table, plan, spec.preprocess)

    fold_metrics: list[MetricsReport] = []
    fold_cms: list[np.ndarray] = []
    n_classes = spec.nn.n_classes
    oof_scores = np.zeros((table.n_rows, n_classes))
    oof_labels = np.zeros(table.n_rows, dtype=np.int64)
    for i in range(plan.k):
        train, val, test = materialize_fold(table, plan, i)
        try:
            scores, pred, seconds = _run_fold(
                train, val, test, spec, _fold_seed(seed, i), preprocessors[i]
            )
        except Exception as exc:
            raise RuntimeError(f"fold {i} failed in stage {spec.model!r}: {exc}") from exc
        cm = confusion_matrix(test.labels, pred, n_classes)
        report = metrics_from_cm(cm)
        report.train_seconds = seconds
        fold_metrics.append(report)
        fold_cms.append(cm)
        test_idx = plan.fold_indices(i)
        oof_scores[test_idx] = scores
        oof_labels[test_idx] = test.labels
    return CvReport(
        k=plan.k,
        seed=seed,
        model=spec.model,
        fold_metrics=fold_metrics,
        fold_cms=fold_cms,
        mean=_mean_summary(fold_metrics),
        pooled_cm=np.sum(fold_cms, axis=0),
        oof_scores=oof_scores,
        oof_labels=oof_labels,
    )


@dataclass
class ComparisonReport:
    """Per-method CvReports computed on one shared fold plan."""

    dpi: int
    methods: list[str]
    reports: dict[str, CvReport]

    def grid(self) -> list[dict]:
        rows = []
        for method in self.methods:
            report = self.reports[method]
            row = {"dpi": self.dpi, "method": method}
            row.update(report.mean)
            rows.append(row)
        return rows


def compare_methods(
    table: FeatureTable,
    methods: list[str],
    k: int = 10,
    seed: int = 0,
    spec: PipelineSpec | None = None,
) -> ComparisonReport:
    """Cross-validate every method on identical folds and preprocessing."""
    if not methods:
        raise ValueError("methods must be non-empty")
    spec = spec or PipelineSpec()
    plan = stratified_kfold(table, k, seed)
    fps = fold_preprocessors(table, plan, spec.preprocess)
    reports = {}
    for method in methods:
        method_spec = replace(spec, model=method)
        reports[method] = cross_validate(
            table, method_spec, k=k, seed=seed, plan=plan, preprocessors=fps
        )
    return ComparisonReport(dpi=table.dpi, methods=list(methods), reports=reports)
