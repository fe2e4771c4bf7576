import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import central_difference, spearman
from fastlink.codec import CodecModel, decode, encode, loss
from fastlink.errors import ConfigurationError
from fastlink.fading import ChannelConfig
from fastlink.harness.datasets import synth_dataset
from fastlink.importance import (
    EvaluatorModel,
    ImportanceVector,
    build_distill_dataset,
    distill_train,
    evaluate,
    feature_gradient,
    grad_importance,
    load_evaluator,
    load_pairs,
    normalize,
    raw_predict,
    save_evaluator,
    save_pairs,
)


def _model(seed=0):
    return CodecModel.random(4, 2, 2, (4, 4, 1), seed=seed)


def test_unused_feature_has_zero_raw_score_and_minimum():
    m = _model()
    W2 = m.W2.copy()
    W2[:, 4:8] = 0.0  # feature 1 never reaches the image
    m = CodecModel(m.W1, m.b1, W2, m.b2, 4, 2, 2, (4, 4, 1))
    s = np.random.default_rng(0).random(16)
    A = encode(m, s)
    g = feature_gradient(m, s, decode(m, A))
    assert np.all(g[1] == 0.0)
    # signed scores can be negative, so the minimum property needs rectified pooling
    for pooling in ("abs", "relu"):
        assert grad_importance(m, A, s, decode(m, A), pooling).scores[1] == 0.0


def test_identical_feature_blocks_score_equally():
    m = _model()
    W2 = m.W2.copy()
    W2[:, 4:8] = W2[:, 0:4]
    m = CodecModel(m.W1, m.b1, W2, m.b2, 4, 2, 2, (4, 4, 1))
    A = np.random.default_rng(1).standard_normal((4, 2, 2))
    A[1] = A[0]
    s = np.random.default_rng(2).random(16)
    g = feature_gradient(m, s, decode(m, A))
    np.testing.assert_array_equal(g[0], g[1])


def test_feature_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    m = _model(5)
    for _ in range(2):
        s = rng.random(16)
        A = rng.standard_normal((4, 2, 2))
        analytic = feature_gradient(m, s, decode(m, A))
        fd = central_difference(lambda: loss(s, decode(m, A)), A)
        assert np.linalg.norm(analytic - fd) / np.linalg.norm(fd) < 1e-4


def test_grad_importance_shape_checks():
    m = _model()
    with pytest.raises(ConfigurationError):
        grad_importance(m, np.zeros(5), np.zeros(16), np.zeros(16))
    with pytest.raises(ConfigurationError):
        feature_gradient(m, np.zeros(15), np.zeros(16))
    with pytest.raises(ConfigurationError):
        grad_importance(m, np.zeros(16), np.zeros(16), np.zeros(16), pooling="max")


def test_normalize_ties_and_range():
    v = normalize([3.0, 3.0, 3.0])
    assert v.tied and np.all(v.scores == 0)
    v = normalize([2.0, -1.0, 0.5])
    np.testing.assert_allclose(v.scores, [1.0, 0.0, 0.5])
    with pytest.raises(ConfigurationError):
        normalize([1.0, np.inf])


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(2, 20), elements=st.floats(-1e6, 1e6)))
def test_normalize_idempotent(raw):
    once = normalize(raw).scores
    np.testing.assert_allclose(normalize(once).scores, once, atol=1e-12)
    assert once.min() == 0.0 and (once.max() == 1.0 or np.all(once == 0))


def _ds(count, seed=0):
    return synth_dataset(count, 4, 0.9, seed=seed)


def test_distill_dataset_shapes_and_determinism():
    m = _model()
    ch = ChannelConfig("rayleigh", snr_db=10.0)
    pairs = build_distill_dataset(m, _ds(1), ch, seed=4)
    assert len(pairs) == 1 and pairs[0][0].shape == (4, 2, 2) and len(pairs[0][1]) == 4
    img = _ds(1)[0]
    a, b = build_distill_dataset(m, [img, img], ch, seeds=[7, 7])
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1].scores, b[1].scores)


def test_distill_dataset_statistics():
    m = CodecModel.pca(synth_dataset(256, 16, 0.9, seed=0), 16, 4, 4)
    pairs = build_distill_dataset(m, synth_dataset(256, 16, 0.9, seed=1), ChannelConfig(snr_db=10.0),
                                  seed=2, pooling="abs")
    omega = np.stack([w.scores for _, w in pairs])
    mean, std = omega.mean(axis=0), omega.std(axis=0)
    assert omega.shape == (256, 16)
    assert np.all((mean > 0) & (mean < 1)) and np.all(std > 0)


def _planted(count=64, seed=0):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((4, 16)) * 0.05
    pairs = []
    for _ in range(count):
        A = rng.standard_normal((4, 2, 2))
        pairs.append((A, 0.5 + M @ A.ravel()))
    return pairs, M


def test_constant_targets_recovered():
    rng = np.random.default_rng(1)
    target = np.array([0.1, 0.7, 0.3, 0.9])
    pairs = [(rng.standard_normal((4, 2, 2)), target) for _ in range(40)]
    ev = distill_train(pairs, ridge=1e-3)
    np.testing.assert_allclose(evaluate(ev, rng.standard_normal((4, 2, 2))).scores, target, atol=1e-8)


def test_planted_linear_relationship():
    pairs, _ = _planted()
    ev = distill_train(pairs, ridge=0.0)
    for A, w in pairs:
        assert np.max(np.abs(raw_predict(ev, A) - w)) < 1e-8
        assert spearman(evaluate(ev, A).scores, w) == pytest.approx(1.0)


def test_evaluate_deterministic_and_clipped():
    pairs, _ = _planted()
    ev = distill_train(pairs, ridge=0.0)
    A = 100 * np.random.default_rng(9).standard_normal((4, 2, 2))
    out1, out2 = evaluate(ev, A).scores, evaluate(ev, A).scores
    np.testing.assert_array_equal(out1, out2)
    assert np.all((out1 >= 0) & (out1 <= 1))


def test_distill_errors():
    pairs, _ = _planted(31)
    with pytest.raises(ConfigurationError):
        distill_train(pairs)
    ev = distill_train(_planted()[0])
    unfitted = EvaluatorModel(ev.coef, ev.intercept, ev.feature_shape, fitted=False)
    with pytest.raises(ConfigurationError):
        evaluate(unfitted, np.zeros((4, 2, 2)))
    with pytest.raises(ConfigurationError):
        evaluate(ev, np.zeros(3))


def test_evaluator_and_pairs_roundtrip(tmp_path):
    pairs, _ = _planted()
    ev = distill_train(pairs, ridge=0.1)
    save_evaluator(ev, tmp_path / "ev.bin")
    back = load_evaluator(tmp_path / "ev.bin")
    np.testing.assert_array_equal(back.coef, ev.coef)
    np.testing.assert_array_equal(back.intercept, ev.intercept)
    assert back.feature_shape == (4, 2, 2) and back.sample_count == 64
    save_pairs(pairs, tmp_path / "p.bin")
    loaded = load_pairs(tmp_path / "p.bin")
    assert len(loaded) == 64
    np.testing.assert_array_equal(loaded[3][0], pairs[3][0])
    assert isinstance(loaded[3][1], ImportanceVector)
    np.testing.assert_array_equal(loaded[3][1].scores, pairs[3][1])
