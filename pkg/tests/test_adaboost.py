import math

import numpy as np
import pytest

from idskit.adaboost import (
    AdaboostModel,
    Stump,
    alpha_for_error,
    load_adaboost,
    predict,
    predict_many,
    save_adaboost,
    train_adaboost,
    train_stump,
)
from idskit.dataset import ClassLabel

A, B, C_ = ClassLabel.NORMAL, ClassLabel.DOS, ClassLabel.PROBE


def brute_force_stump_error(X, y, w):
    """Enumerate every feature/midpoint (plus the constant stump)."""
    best = None
    class_w = np.zeros(5)
    np.add.at(class_w, y, w)
    best = w.sum() - class_w.max()
    for f in range(X.shape[1]):
        vals = np.sort(np.unique(X[:, f]))
        for lo, hi in zip(vals, vals[1:]):
            t = (lo + hi) / 2
            err = 0.0
            for side in (X[:, f] <= t, X[:, f] > t):
                side_w = np.zeros(5)
                np.add.at(side_w, y[side], w[side])
                err += side_w.sum() - side_w.max()
            best = min(best, err)
    return best


class TestTrainStump:
    def test_separable_fixture(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([A, A, B, B])
        w = np.full(4, 0.25)
        stump, e = train_stump(X, y, w)
        # oracle: midpoints 0.5, 1.5, 2.5 give errors 0.25, 0, 0.25
        assert stump.threshold == pytest.approx(1.5)
        assert e == 0.0
        assert (stump.left_label, stump.right_label) == (A, B)

    def test_single_class_constant_stump(self):
        X = np.array([[0.0], [5.0]])
        y = np.array([B, B])
        stump, e = train_stump(X, y, np.array([0.5, 0.5]))
        assert e == 0.0
        assert stump.left_label == stump.right_label == B

    def test_weight_dominance(self):
        X = np.array([[0.0], [1.0], [2.0]])
        y = np.array([B, A, B])
        w = np.array([0.015, 0.97, 0.015])
        stump, e = train_stump(X, y, w)
        assert stump.predict(np.array([[1.0]]))[0] == A
        assert e < 0.97

    def test_matches_brute_force_on_random_inputs(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            n = int(rng.integers(2, 25))
            X = np.round(rng.normal(size=(n, 3)), 1)
            y = rng.integers(0, 4, n)
            w = rng.uniform(0.01, 1, n)
            w = w / w.sum()
            _, e = train_stump(X, y, w)
            assert e == pytest.approx(brute_force_stump_error(X, y, w))

    def test_empty_input_is_error(self):
        with pytest.raises(ValueError):
            train_stump(np.zeros((0, 2)), np.array([]), np.array([]))

    def test_bad_weights_rejected(self):
        X = np.zeros((2, 1))
        y = np.array([A, B])
        with pytest.raises(ValueError):
            train_stump(X, y, np.array([0.5, 0.2]))


class TestAlpha:
    def test_strictly_decreasing_in_error(self):
        for C in (2, 3, 5):
            grid = np.linspace(0.01, (C - 1) / C - 0.01, 40)
            alphas = [alpha_for_error(float(e), C) for e in grid]
            assert all(x > y for x, y in zip(alphas, alphas[1:]))

    def test_positive_below_chance(self):
        for C in (2, 5):
            e = (C - 1) / C - 1e-6
            assert alpha_for_error(e, C) > 0

    def test_perfect_round_capped(self):
        a = alpha_for_error(0.0, 2)
        assert math.isfinite(a)
        assert a == pytest.approx(math.log((1 - 1e-10) / 1e-10), rel=1e-6)


class TestTrainAdaboost:
    def test_nt_one_is_single_best_stump(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([A, A, B, B])
        model = train_adaboost(X, y, nt=1)
        assert len(model.stumps) == 1
        assert model.stumps[0].threshold == pytest.approx(1.5)

    def test_chance_error_round_aborts(self):
        # any stump on this data has weighted error exactly 0.5 (C = 2)
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        y = np.array([A, B, A, B])
        model = train_adaboost(X, y, nt=5)
        assert model.stumps == []
        with pytest.raises(ValueError):
            predict(model, np.array([0.0]))

    def test_separable_fixture_zero_training_error(self):
        X = np.array([[0.0], [1.0], [2.0], [5.0], [6.0], [7.0]])
        y = np.array([A, A, A, B, B, B])
        model = train_adaboost(X, y, nt=5)
        # brute-force oracle: evaluate the weighted ensemble on all 6 points
        scores = np.zeros((6, 5))
        for stump, alpha in zip(model.stumps, model.alphas):
            for i in range(6):
                side = stump.left_label if X[i, 0] <= stump.threshold else stump.right_label
                scores[i, side] += alpha
        preds = scores.argmax(axis=1)
        assert np.array_equal(preds, y)
        assert len(model.stumps) <= 5

    def test_weights_stay_normalized_and_positive(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(40, 3))
        y = rng.integers(0, 3, 40)
        # re-run the loop manually to observe intermediate weights
        w = np.full(40, 1 / 40)
        classes = np.unique(y)
        C = len(classes)
        for _ in range(5):
            stump, e = train_stump(X, y, w)
            if e >= (C - 1) / C or e == 0:
                break
            alpha = alpha_for_error(e, C)
            miss = stump.predict(X) != y
            w = w * np.exp(alpha * miss)
            w = w / w.sum()
            assert w.sum() == pytest.approx(1.0, abs=1e-9)
            assert (w > 0).all()

    def test_misclassified_rows_gain_relative_weight(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([A, B, A, B])
        w = np.full(4, 0.25)
        stump, e = train_stump(X, y, w)
        assert 0 < e < 0.5
        alpha = alpha_for_error(e, 2)
        miss = stump.predict(X) != y
        w2 = w * np.exp(alpha * miss)
        w2 = w2 / w2.sum()
        assert (w2[miss] > w[miss]).all()
        assert (w2[~miss] < w[~miss]).all()

    def test_single_class_slice_gets_constant_model(self):
        X = np.array([[0.0], [1.0], [2.0]])
        y = np.array([B, B, B])
        model = train_adaboost(X, y, nt=3)
        assert len(model.stumps) == 1
        assert predict(model, np.array([9.9])) == B

    def test_bad_nt(self):
        with pytest.raises(ValueError):
            train_adaboost(np.zeros((2, 1)), np.array([A, B]), nt=0)


class TestPredict:
    def test_single_stump_vote(self):
        model = AdaboostModel(
            stumps=[Stump(0, 0.5, int(A), int(B))], alphas=[0.1],
            classes=[int(A), int(B)], nt=1,
        )
        assert predict(model, np.array([0.0])) == A
        assert predict(model, np.array([1.0])) == B

    def test_weighted_vote_arithmetic(self):
        # DoS stump alpha 2.0 vs two Normal stumps alpha 0.5 each
        model = AdaboostModel(
            stumps=[Stump(0, 10.0, int(B), int(B)),
                    Stump(0, 10.0, int(A), int(A)),
                    Stump(0, 10.0, int(A), int(A))],
            alphas=[2.0, 0.5, 0.5],
            classes=[int(A), int(B)], nt=3,
        )
        assert predict(model, np.array([0.0])) == B

    def test_equal_alphas_reduce_to_majority(self):
        model = AdaboostModel(
            stumps=[Stump(0, 10.0, int(B), int(B)),
                    Stump(0, 10.0, int(B), int(B)),
                    Stump(0, 10.0, int(A), int(A))],
            alphas=[1.0, 1.0, 1.0],
            classes=[int(A), int(B)], nt=3,
        )
        assert predict(model, np.array([0.0])) == B

    def test_tie_goes_to_lower_class_index(self):
        model = AdaboostModel(
            stumps=[Stump(0, 10.0, int(B), int(B)),
                    Stump(0, 10.0, int(A), int(A))],
            alphas=[1.0, 1.0],
            classes=[int(A), int(B)], nt=2,
        )
        assert predict(model, np.array([0.0])) == A


class TestPersistence:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(60, 4))
        y = rng.integers(0, 3, 60)
        model = train_adaboost(X, y, nt=4)
        path = tmp_path / "boost.txt"
        save_adaboost(model, path)
        loaded = load_adaboost(path)
        assert loaded.classes == model.classes
        assert loaded.nt == model.nt
        assert loaded.alphas == pytest.approx(model.alphas)
        np.testing.assert_array_equal(
            predict_many(loaded, X), predict_many(model, X)
        )
