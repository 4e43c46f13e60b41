"""Three-stage preprocessing: robust scaling, variance-threshold feature
importance, and PCA, plus the post-PCA importance re-check.

Fit on training rows, then apply the frozen parameters identically to every
split. A paper-faithful mode (fit once on the full table before the fold
loop) is available behind a config flag for replication; the default avoids
that train/test leakage.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .dataset import FeatureTable

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ScalerParams:
    medians: np.ndarray
    iqrs: np.ndarray
    degenerate: np.ndarray  # True where IQR == 0

    def __post_init__(self):
        object.__setattr__(self, "medians", np.asarray(self.medians, dtype=np.float64))
        object.__setattr__(self, "iqrs", np.asarray(self.iqrs, dtype=np.float64))
        object.__setattr__(self, "degenerate", np.asarray(self.degenerate, dtype=bool))

    @property
    def n_features(self) -> int:
        return self.medians.size


def fit_robust_scaler(train: FeatureTable) -> ScalerParams:
    """Per-feature median and interquartile range (linear-interpolation
    quantiles at p = 0.25 and 0.75). Zero-IQR features are flagged."""
    if train.n_rows < 2:
        raise ValueError("need at least 2 rows to fit the scaler")
    x = train.features
    medians = np.quantile(x, 0.5, axis=0)
    q1 = np.quantile(x, 0.25, axis=0)
    q3 = np.quantile(x, 0.75, axis=0)
    iqrs = q3 - q1
    return ScalerParams(medians=medians, iqrs=iqrs, degenerate=iqrs == 0.0)


def apply_scaler(params: ScalerParams, table: FeatureTable) -> FeatureTable:
    """x' = (x - median) / IQR; degenerate features are centered only."""
    if table.n_features != params.n_features:
        raise ValueError(
            f"table has {table.n_features} features, scaler expects {params.n_features}"
        )
    divisor = np.where(params.degenerate, 1.0, params.iqrs)
    scaled = (table.features - params.medians) / divisor
    return table.with_features(scaled, table.feature_names)


@dataclass(frozen=True)
class ImportanceReport:
    """Per-feature importance (population variance) against a threshold."""

    importance: np.ndarray
    threshold: float
    mask: np.ndarray  # importance > threshold

    def __post_init__(self):
        object.__setattr__(self, "importance", np.asarray(self.importance, dtype=np.float64))
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))

    @property
    def n_passing(self) -> int:
        return int(self.mask.sum())


def variance_importance(table: FeatureTable, threshold: float = 0.5) -> ImportanceReport:
    if table.n_rows < 2:
        raise ValueError("need at least 2 rows to compute importance")
    importance = table.features.var(axis=0)  # population variance (ddof=0)
    return ImportanceReport(importance=importance, threshold=threshold, mask=importance > threshold)


@dataclass(frozen=True)
class PcaModel:
    means: np.ndarray
    components: np.ndarray  # (n_components, n_features), orthonormal rows
    explained_variance: np.ndarray  # non-increasing

    def __post_init__(self):
        object.__setattr__(self, "means", np.asarray(self.means, dtype=np.float64))
        object.__setattr__(self, "components", np.asarray(self.components, dtype=np.float64))
        object.__setattr__(
            self, "explained_variance", np.asarray(self.explained_variance, dtype=np.float64)
        )

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def n_features(self) -> int:
        return self.components.shape[1]


def fit_pca(table: FeatureTable, n_components: int) -> PcaModel:
    """Top eigenvectors of the population covariance, ordered by explained
    variance (descending), each row's largest-magnitude loading made
    positive so the basis is reproducible."""
    n, d = table.features.shape
    if not 1 <= n_components <= d:
        raise ValueError(f"n_components must be in [1, {d}], got {n_components}")
    if d > n:
        raise ValueError(f"need at least as many rows ({n}) as features ({d})")
    x = table.features
    means = x.mean(axis=0)
    xc = x - means
    cov = (xc.T @ xc) / n
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:n_components]
    components = eigvecs[:, order].T.copy()
    explained = np.maximum(eigvals[order], 0.0)
    # sign convention: largest-|loading| entry of each component is positive
    lead = np.argmax(np.abs(components), axis=1)
    signs = np.where(components[np.arange(n_components), lead] < 0.0, -1.0, 1.0)
    components *= signs[:, None]
    return PcaModel(means=means, components=components, explained_variance=explained)


def apply_pca(model: PcaModel, table: FeatureTable) -> FeatureTable:
    """Project rows onto the component basis; labels and dpi are preserved."""
    if table.n_features != model.n_features:
        raise ValueError(
            f"table has {table.n_features} features, PCA expects {model.n_features}"
        )
    scores = (table.features - model.means) @ model.components.T
    names = tuple(f"pc{j:02d}" for j in range(1, model.n_components + 1))
    return table.with_features(scores, names)


def reconstruct_pca(model: PcaModel, scores: np.ndarray) -> np.ndarray:
    return scores @ model.components + model.means


@dataclass(frozen=True)
class PreprocessConfig:
    threshold: float = 0.5
    n_components: int | None = None  # None: use the count of features passing the threshold
    paper_faithful: bool = False


@dataclass(frozen=True)
class FittedPreprocessor:
    scaler: ScalerParams
    pre_importance: ImportanceReport
    pca: PcaModel
    post_importance: ImportanceReport
    config: PreprocessConfig = field(default_factory=PreprocessConfig)

    @property
    def n_components(self) -> int:
        return self.pca.n_components


def fit_pipeline(train: FeatureTable, cfg: PreprocessConfig | None = None) -> FittedPreprocessor:
    """Fit scaler -> importance on scaled features -> PCA -> importance on
    the PCA scores.

    The PCA width defaults to the number of scaled features whose variance
    exceeds the threshold, mirroring the keep-what-matters dimension choice
    while still projecting from all input features.
    """
    cfg = cfg or PreprocessConfig()
    scaler = fit_robust_scaler(train)
    scaled = apply_scaler(scaler, train)
    pre = variance_importance(scaled, cfg.threshold)
    if cfg.n_components is None:
        n_components = pre.n_passing
        if n_components < 2:
            raise ValueError(
                f"only {n_components} features pass the variance threshold "
                f"{cfg.threshold}; need at least 2"
            )
    else:
        n_components = cfg.n_components
    pca = fit_pca(scaled, n_components)
    scores = apply_pca(pca, scaled)
    post = variance_importance(scores, cfg.threshold)
    return FittedPreprocessor(
        scaler=scaler, pre_importance=pre, pca=pca, post_importance=post, config=cfg
    )


def apply_pipeline(fp: FittedPreprocessor, table: FeatureTable) -> FeatureTable:
    """Apply the frozen scaler and projection to any table of matching schema."""
    return apply_pca(fp.pca, apply_scaler(fp.scaler, table))


def save_preprocessor(fp: FittedPreprocessor, path) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "config": asdict(fp.config),
        "scaler": {
            "medians": fp.scaler.medians.tolist(),
            "iqrs": fp.scaler.iqrs.tolist(),
            "degenerate": fp.scaler.degenerate.astype(int).tolist(),
        },
        "pre_importance": _importance_doc(fp.pre_importance),
        "pca": {
            "means": fp.pca.means.tolist(),
            "components": fp.pca.components.tolist(),  # row-major
            "explained_variance": fp.pca.explained_variance.tolist(),
        },
        "post_importance": _importance_doc(fp.post_importance),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_preprocessor(path) -> FittedPreprocessor:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported preprocessor format: {doc.get('format_version')!r}")
    cfg = PreprocessConfig(**doc["config"])
    scaler = ScalerParams(
        medians=doc["scaler"]["medians"],
        iqrs=doc["scaler"]["iqrs"],
        degenerate=np.asarray(doc["scaler"]["degenerate"], dtype=bool),
    )
    pca = PcaModel(
        means=doc["pca"]["means"],
        components=doc["pca"]["components"],
        explained_variance=doc["pca"]["explained_variance"],
    )
    return FittedPreprocessor(
        scaler=scaler,
        pre_importance=_importance_from_doc(doc["pre_importance"]),
        pca=pca,
        post_importance=_importance_from_doc(doc["post_importance"]),
        config=cfg,
    )


def _importance_doc(report: ImportanceReport) -> dict:
    return {
        "importance": report.importance.tolist(),
        "threshold": report.threshold,
        "mask": report.mask.astype(int).tolist(),
    }


def _importance_from_doc(doc: dict) -> ImportanceReport:
    return ImportanceReport(
        importance=doc["importance"],
        threshold=doc["threshold"],
        mask=np.asarray(doc["mask"], dtype=bool),
    )
