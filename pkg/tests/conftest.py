import numpy as np
import pytest

from measpike.dataset import FeatureTable


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_table(n_rows=30, n_features=61, seed=0, dpi=0):
    """Random table with cycling labels, canonical width by default."""
    gen = np.random.default_rng(seed)
    feats = gen.normal(size=(n_rows, n_features))
    labels = np.arange(n_rows, dtype=np.int64) % 3
    return FeatureTable(feats, labels, dpi)


def nearest_centroid_accuracy(train, test, drop_time=True):
    """Oracle classifier: per-class channel means, nearest-mean prediction.

    The sequential time column is excluded by default; it is class-blind by
    construction and its raw scale would swamp the channel distances.
    """
    stop = -1 if drop_time and train.feature_names[-1] == "time" else None
    tr = train.features[:, :stop]
    te = test.features[:, :stop]
    means = np.vstack([tr[train.labels == c].mean(axis=0) for c in range(3)])
    d = ((te[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    pred = d.argmin(axis=1)
    return float((pred == test.labels).mean())
