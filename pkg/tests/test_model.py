from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import minimize

from gcrdialect import model as lm
from gcrdialect.corpus import GCR_TAGS
from gcrdialect.errors import ConfigurationError, DataFormatError, InsufficientDataError
from gcrdialect.features import FeatureConfig, FeatureSpace, SparseFeatureVector

A, B, C = GCR_TAGS[:3]
CFG = FeatureConfig(char_1g=True)


def space(n):
    return FeatureSpace([f"f{i}" for i in range(n)], frozen=True)


def vec(mapping):
    return SparseFeatureVector.from_mapping(mapping)


def test_separable_toy():
    data = [(vec({0: 1.0}), A)] * 5 + [(vec({1: 1.0}), B)] * 5
    m = lm.train(data, space=space(2), config=CFG)
    assert lm.predict(m, vec({0: 1.0})) == A and lm.predict(m, vec({1: 1.0})) == B


def test_identical_vectors_predict_majority():
    x = vec({0: 1.0})
    data = [(x, A), (x, B), (x, B), (x, C), (x, B)]
    m = lm.train(data, space=space(1), config=CFG, tag_set=(A, B, C))
    preds = lm.predict_many(m, [v for v, _ in data])
    assert set(preds) == {B}
    assert sum(p == t for p, (_, t) in zip(preds, data)) / len(data) == pytest.approx(3 / 5)


def test_training_deterministic():
    rng = np.random.default_rng(0)
    data = [(vec({int(i): 1.0 for i in rng.choice(6, 3, replace=False)}), GCR_TAGS[k % 3]) for k in range(30)]
    s = lm.TrainSettings(seed=5)
    assert lm.dumps(lm.train(data, s, space=space(6), config=CFG)) == lm.dumps(lm.train(data, s, space=space(6), config=CFG))


def test_objective_matches_direct_minimization():
    rng = np.random.default_rng(3)
    n, f = 60, 8
    dense = (rng.random((n, f)) < 0.4) * rng.integers(1, 3, (n, f))
    labels = [GCR_TAGS[k] for k in rng.integers(0, 3, n)]
    data = [(vec({j: float(v) for j, v in enumerate(row) if v}), t) for row, t in zip(dense, labels)]
    settings = lm.TrainSettings(regularization_c=1.0, epochs=500, tolerance=1e-8)
    m = lm.train(data, settings, space=space(f), config=CFG, tag_set=GCR_TAGS[:3])
    X = np.hstack([dense, np.ones((n, 1))])
    lam = 1.0 / n
    for k, tag in enumerate(m.tag_set):
        y = np.array([1.0 if t == tag else -1.0 for t in labels])

        def primal(w):
            slack = np.maximum(0.0, 1.0 - y * (X @ w))
            grad = lam * w - 2.0 * (X.T @ (slack * y)) / n
            return 0.5 * lam * w @ w + np.mean(slack ** 2), grad

        best = minimize(primal, np.zeros(f + 1), jac=True, method="L-BFGS-B", options={"gtol": 1e-12}).fun
        ours = primal(np.append(m.weights[k], m.bias[k]))[0]
        assert ours == pytest.approx(best, rel=1e-6, abs=1e-9)


def test_best_trace_non_increasing():
    rng = np.random.default_rng(1)
    data = [(vec({int(i): 1.0 for i in rng.choice(10, 4, replace=False)}), GCR_TAGS[k % 3]) for k in range(40)]
    m = lm.train(data, lm.TrainSettings(epochs=20, tolerance=0.0), space=space(10), config=CFG)
    assert (np.diff(m.log.best, axis=0) <= 0).all()
    assert m.log.best.shape == (20, 3)


def test_dual_ascends_and_bounds_primal():
    rng = np.random.default_rng(2)
    data = [(vec({int(i): 1.0 for i in rng.choice(10, 4, replace=False)}), GCR_TAGS[k % 3]) for k in range(40)]
    m = lm.train(data, lm.TrainSettings(epochs=300, tolerance=1e-9), space=space(10), config=CFG)
    dual, primal = m.log.dual, m.log.iterate
    assert (np.diff(dual, axis=0) >= -1e-12).all()
    assert (dual <= primal + 1e-12).all()
    assert np.abs(primal[-1] - dual[-1]).max() < 1e-6


def test_train_needs_two_tags():
    with pytest.raises(InsufficientDataError):
        lm.train([(vec({0: 1.0}), A)], space=space(1), config=CFG)


def test_settings_validation():
    with pytest.raises(ConfigurationError):
        lm.TrainSettings(regularization_c=0)
    with pytest.raises(ConfigurationError):
        lm.TrainSettings(epochs=0)


def hand_model():
    return lm.LinearModel((A, B), np.array([[1.0, 0.0], [0.0, 1.0]]), np.zeros(2), space(2), CFG)


def test_hand_set_scores():
    m = hand_model()
    np.testing.assert_array_equal(lm.decision_scores(m, vec({0: 3.0})), [3.0, 0.0])
    assert lm.predict(m, vec({0: 3.0})) == A
    assert lm.predict(m, vec({})) == A  # exact tie goes to the first tag
    m.bias[:] = [0.5, -0.25]
    np.testing.assert_array_equal(lm.decision_scores(m, vec({})), [0.5, -0.25])


def test_linearity():
    m = hand_model()
    m.bias[:] = [0.3, -0.1]
    x = vec({0: 1.5, 1: -2.0})
    x2 = vec({0: 3.0, 1: -4.0})
    np.testing.assert_allclose(lm.decision_scores(m, x2) - m.bias, 2 * (lm.decision_scores(m, x) - m.bias))


def test_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    m = lm.LinearModel((A, B, C), rng.normal(size=(3, 20)), rng.normal(size=3), space(20), CFG)
    path = tmp_path / "m.txt"
    lm.save(m, path)
    back = lm.load(path)
    assert lm.dumps(back) == path.read_text(encoding="utf-8")
    vecs = [vec({int(i): float(rng.normal()) for i in rng.choice(20, 5, replace=False)}) for _ in range(100)]
    assert np.abs(lm.decision_matrix(m, vecs) - lm.decision_matrix(back, vecs)).max() <= 1e-12
    assert back.space.keys == m.space.keys and back.config == m.config


def test_version_mismatch(tmp_path):
    text = lm.dumps(hand_model()).replace("gcr-dialect-model v1", "gcr-dialect-model v99", 1)
    with pytest.raises(DataFormatError, match="version"):
        lm.loads(text)


@pytest.mark.parametrize("mutate,match", [
    (lambda t: t[: t.index("weights")], "truncated"),
    (lambda t: t.replace("\t0\t1 0", "\t0\tnan 0"), "non-finite|bad number"),
    (lambda t: "hello\n" + t, "not a model"),
])
def test_corrupt_files(mutate, match):
    with pytest.raises(DataFormatError, match=match):
        lm.loads(mutate(lm.dumps(hand_model())))


def test_out_of_space_vector():
    with pytest.raises(ValueError):
        lm.decision_scores(hand_model(), vec({5: 1.0}))
