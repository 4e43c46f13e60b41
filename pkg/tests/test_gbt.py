import json

import numpy as np
import pytest

from measpike.dataset import FeatureTable
from measpike.gbt import (
    BoostedEnsemble,
    GbtConfig,
    decision_scores,
    find_best_split,
    fit_gbt,
    leaf_weight,
    load_gbt,
    multiclass_log_loss,
    predict_gbt,
    save_gbt,
    softmax_grad_hess,
)


def brute_force_split(x, g, h, lam, gamma, min_child_hessian=0.0):
    """Independent exhaustive enumeration of every (feature, boundary),
    applying the documented near-tie rule: among gains within 1e-9
    (relative) of the maximum, the first candidate in feature-major,
    threshold-ascending order wins."""
    candidates = []
    n, d = x.shape
    g_tot, h_tot = g.sum(), h.sum()
    parent = g_tot * g_tot / (h_tot + lam)
    for j in range(d):
        vals = np.unique(x[:, j])
        for a, b in zip(vals[:-1], vals[1:]):
            thr = (a + b) / 2.0
            if not thr < b:
                continue
            mask = x[:, j] <= thr
            gl, hl = g[mask].sum(), h[mask].sum()
            gr, hr = g[~mask].sum(), h[~mask].sum()
            if min_child_hessian > 0.0 and (hl < min_child_hessian or hr < min_child_hessian):
                continue
            gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent) - gamma
            candidates.append((gain, j, thr))
    if not candidates:
        return None
    best_val = max(c[0] for c in candidates)
    if not best_val > 0.0:
        return None
    tol = 1e-9 * max(1.0, abs(best_val))
    chosen = next(c for c in candidates if c[0] >= best_val - tol)
    if chosen[0] <= 0.0:
        return None
    return chosen


def toy_table(n=60, seed=0, spread=5.0, d=2):
    rng = np.random.default_rng(seed)
    labels = np.arange(n, dtype=np.int64) % 3
    centers = rng.normal(size=(3, d)) * spread
    feats = centers[labels] + rng.normal(size=(n, d))
    return FeatureTable(feats, labels, 0, tuple(f"f{i}" for i in range(d)))


class TestGradHess:
    def test_uniform_logits_hand_values(self):
        g, h = softmax_grad_hess(np.zeros((1, 3)), np.array([0]))
        assert np.allclose(g[0], [-2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], atol=1e-15)
        assert np.allclose(h[0], [2.0 / 9.0] * 3, atol=1e-15)

    def test_gradient_vanishes_at_optimum(self):
        logits = np.array([[60.0, 0.0, 0.0]])
        g, _ = softmax_grad_hess(logits, np.array([0]))
        assert np.max(np.abs(g)) < 1e-12

    def test_rows_sum_to_zero(self, rng):
        logits = rng.normal(size=(50, 3)) * 3.0
        labels = rng.integers(0, 3, 50)
        g, h = softmax_grad_hess(logits, labels)
        assert np.max(np.abs(g.sum(axis=1))) < 1e-12
        assert np.all(h >= 0.0)
        assert np.all(h > 0.0)  # finite logits keep p strictly inside (0,1)


class TestLeafWeight:
    def test_hand_value(self):
        assert leaf_weight(-2.0, 4.0, 1.0) == pytest.approx(0.4, abs=1e-15)

    def test_zero_gradient(self):
        assert leaf_weight(0.0, 3.0, 1.0) == 0.0

    def test_lambda_shrinks_monotonically(self):
        values = [abs(leaf_weight(-2.0, 4.0, lam)) for lam in (0.0, 1.0, 10.0, 1e6)]
        assert all(b < a for a, b in zip(values, values[1:]))
        assert values[-1] < 1e-5

    def test_random_triples_match_formula(self, rng):
        for _ in range(100):
            g = float(rng.normal() * 10)
            h = float(rng.uniform(0.1, 5.0))
            lam = float(rng.uniform(0.0, 3.0))
            assert leaf_weight(g, h, lam) == pytest.approx(-g / (h + lam), rel=1e-15)

    def test_nonpositive_denominator(self):
        with pytest.raises(ValueError):
            leaf_weight(1.0, 0.0, 0.0)


class TestFindBestSplit:
    def test_hand_computed_gain(self):
        x = np.array([[0.0], [1.0]])
        g = np.array([-2.0, 2.0])
        h = np.array([4.0, 4.0])
        split = find_best_split(x, g, h, reg_lambda=1.0, gamma=0.0)
        assert split.feature == 0
        assert split.threshold == 0.5
        assert split.gain == pytest.approx(0.8, abs=1e-12)

    def test_sign_separating_feature(self):
        x = np.array([[0.0], [1.0], [2.0], [10.0], [11.0], [12.0]])
        g = np.array([-1.0, -1.0, -1.0, 1.0, 1.0, 1.0])
        h = np.ones(6)
        split = find_best_split(x, g, h, 1.0, 0.0)
        assert split.threshold == 6.0  # midpoint between the groups

    def test_homogeneous_node_returns_none(self):
        x = np.arange(8.0)[:, None]
        g = np.full(8, 0.5)
        h = np.full(8, 1.0)
        assert find_best_split(x, g, h, 1.0, 0.0) is None

    def test_gamma_can_veto(self):
        x = np.array([[0.0], [1.0]])
        g = np.array([-2.0, 2.0])
        h = np.array([4.0, 4.0])
        assert find_best_split(x, g, h, 1.0, gamma=1.0) is None

    def test_min_child_hessian_respected(self):
        x = np.array([[0.0], [1.0], [2.0], [3.0]])
        g = np.array([-5.0, 1.0, 1.0, 1.0])
        h = np.array([0.3, 1.0, 1.0, 1.0])
        split = find_best_split(x, g, h, 1.0, 0.0, min_child_hessian=1.0)
        # the boundary after row 0 leaves hl = 0.3 < 1, so it must move right
        assert split is None or split.threshold > 0.5

    def test_tie_breaks_to_lowest_feature(self):
        x0 = np.array([[0.0], [1.0], [2.0], [3.0]])
        x = np.hstack([x0, x0.copy()])  # duplicated feature, identical gains
        g = np.array([-1.0, -1.0, 1.0, 1.0])
        h = np.ones(4)
        split = find_best_split(x, g, h, 1.0, 0.0)
        assert split.feature == 0

    def test_matches_brute_force_on_random_data(self, rng):
        for trial in range(200):
            n = int(rng.integers(4, 64))
            d = int(rng.integers(1, 8))
            x = np.round(rng.normal(size=(n, d)) * 3.0, 2)  # duplicates likely
            g = rng.normal(size=n)
            h = rng.uniform(0.05, 2.0, size=n)
            lam = float(rng.uniform(0.0, 2.0))
            gamma = float(rng.choice([0.0, 0.1]))
            mch = float(rng.choice([0.0, 0.5]))
            got = find_best_split(x, g, h, lam, gamma, mch)
            want = brute_force_split(x, g, h, lam, gamma, mch)
            if want is None:
                assert got is None
            else:
                assert got is not None
                assert (got.feature, got.threshold) == (want[1], want[2])
                assert got.gain == pytest.approx(want[0], abs=1e-10)


class TestFitPredict:
    def test_overfits_separable_toy(self):
        table = toy_table()
        cfg = GbtConfig(n_rounds=10)
        ens = fit_gbt(table, cfg)
        probs, pred = predict_gbt(ens, table)
        assert (pred == table.labels).mean() == 1.0
        assert np.max(np.abs(probs.sum(axis=1) - 1.0)) < 1e-6

    def test_zero_learning_rate_stays_at_base_score(self):
        table = toy_table()
        ens = fit_gbt(table, GbtConfig(n_rounds=5, learning_rate=0.0))
        probs, _ = predict_gbt(ens, table)
        assert np.allclose(probs, 1.0 / 3.0, atol=1e-12)

    def test_empty_ensemble_uniform(self):
        table = toy_table()
        ens = fit_gbt(table, GbtConfig(n_rounds=0))
        probs, _ = predict_gbt(ens, table)
        assert np.allclose(probs, 1.0 / 3.0, atol=1e-12)

    def test_single_round_stump_matches_oracle(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(40, 1))
        labels = (x[:, 0] > 0).astype(np.int64)
        table = FeatureTable(x, labels, 0, ("f0",))
        cfg = GbtConfig(n_rounds=1, max_depth=1, min_child_hessian=0.0)
        ens = fit_gbt(table, cfg)
        g, h = softmax_grad_hess(np.zeros((40, 3)), labels)
        for c in range(3):
            want = brute_force_split(x, g[:, c], h[:, c], cfg.reg_lambda, cfg.gamma)
            tree = ens.trees[0][c]
            if want is None:
                # class absent from the labels: homogeneous node, no split
                assert tree.feature[0] == -1
                continue
            assert tree.feature[0] == want[1]
            assert tree.threshold[0] == want[2]
            mask = x[:, 0] <= want[2]
            assert tree.value[tree.left[0]] == pytest.approx(
                leaf_weight(g[mask, c].sum(), h[mask, c].sum(), cfg.reg_lambda), rel=1e-12
            )

    def test_training_loss_non_increasing(self):
        table = toy_table(n=90, seed=3, spread=2.0, d=3)
        ens = fit_gbt(table, GbtConfig(n_rounds=100, learning_rate=0.3))
        losses = np.array(ens.train_loss)
        assert losses.size == 100
        assert np.all(np.diff(losses) <= 1e-9)

    def test_single_class_input_allowed(self):
        rng = np.random.default_rng(0)
        table = FeatureTable(rng.normal(size=(20, 2)), np.ones(20, dtype=np.int64), 0, ("a", "b"))
        ens = fit_gbt(table, GbtConfig(n_rounds=5))
        _, pred = predict_gbt(ens, table)
        assert np.all(pred == 1)

    def test_determinism(self, tmp_path):
        table = toy_table(seed=5)
        cfg = GbtConfig(n_rounds=8)
        a, b = fit_gbt(table, cfg), fit_gbt(table, cfg)
        pa = tmp_path / "a.json"
        pb = tmp_path / "b.json"
        save_gbt(a, pa)
        save_gbt(b, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_serialization_round_trip(self, tmp_path):
        table = toy_table(seed=6)
        ens = fit_gbt(table, GbtConfig(n_rounds=6, max_depth=3))
        path = tmp_path / "ens.json"
        save_gbt(ens, path)
        loaded = load_gbt(path)
        assert np.array_equal(decision_scores(ens, table.features),
                              decision_scores(loaded, table.features))
        doc = json.loads(path.read_text())
        assert doc["config"]["n_rounds"] == 6
        node = doc["trees"][0][0]
        assert "feature" in node or "leaf" in node

    def test_feature_count_mismatch(self):
        table = toy_table()
        ens = fit_gbt(table, GbtConfig(n_rounds=2))
        bad = FeatureTable(np.zeros((3, 5)), np.zeros(3, dtype=np.int64), 0)
        with pytest.raises(Exception):
            predict_gbt(ens, bad)

    def test_log_loss_matches_direct_formula(self, rng):
        logits = rng.normal(size=(30, 3))
        labels = rng.integers(0, 3, 30)
        p = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        want = -np.mean(np.log(p[np.arange(30), labels]))
        assert multiclass_log_loss(logits, labels) == pytest.approx(want, rel=1e-12)
