import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from claimtriage.claims import CLASS_ORDER, ErrorCategory
from claimtriage.corpus import build_pool
from claimtriage.errors import DimensionMismatch, EmptyTrainingSet, InvalidInput
from claimtriage.injector import GenerationSpec, generate_dataset
from claimtriage import gatekeeper as gk

RECORDS, _ = generate_dataset(
    build_pool(120, seed=19),
    GenerationSpec(pass_count=18, fail_counts={c: 9 for c in ErrorCategory}, seed=19),
)


# --- features ---

def test_hash_feature_is_frozen():
    # guards against silent drift of the hashing scheme
    assert gk.hash_feature("rotor", 2 ** 18) == 103235
    assert gk.hash_feature("a rotor", 2 ** 18) == 64228
    assert gk.hash_feature("claim 8", 2 ** 18) == 46188
    assert gk.hash_feature("substantially", 2 ** 18) == 185179
    assert gk.hash_feature("rotor", 32) == 3


def test_featurize_rows_have_unit_norm():
    X = gk.featurize([r.text for r in RECORDS[:10]])
    norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
    assert np.allclose(norms, 1.0, atol=1e-12)


def test_featurize_empty_text_is_zero_row():
    X = gk.featurize([""])
    assert X.nnz == 0


def test_featurize_sublinear_tf():
    one = gk.featurize(["rotor"], dim=64)
    twice = gk.featurize(["rotor rotor"], dim=64)
    col = gk.hash_feature("rotor", 64)
    # before normalization the weights are 1 and 1 + ln 2; the repeated-token
    # row also carries the "rotor rotor" bigram
    big = gk.hash_feature("rotor rotor", 64)
    expect = (1 + math.log(2)) / math.sqrt((1 + math.log(2)) ** 2 + 1)
    assert one[0, col] == 1.0
    assert twice[0, col] == pytest.approx(expect)
    assert twice[0, big] > 0


def test_featurize_includes_bigrams():
    X = gk.featurize(["heated rotor"], dim=2 ** 12)
    cols = {gk.hash_feature(f, 2 ** 12) for f in ("heated", "rotor", "heated rotor")}
    assert set(X.indices.tolist()) == cols


# --- softmax ---

def test_softmax_one_hot_logit():
    p = gk.softmax(np.array([1.0, 0, 0, 0, 0, 0]))
    e = math.e
    assert p[0] == pytest.approx(e / (e + 5), rel=1e-15)
    assert np.allclose(p[1:], 1 / (e + 5))
    assert p.sum() == pytest.approx(1.0)


def test_softmax_uniform_and_shift_invariance():
    assert np.allclose(gk.softmax(np.zeros(6)), 1 / 6)
    logits = np.array([3.0, -1.0, 0.5, 2.0, 0.0, 1.0])
    assert np.allclose(gk.softmax(logits), gk.softmax(logits + 1000.0))


def test_softmax_extreme_logits_stay_finite():
    p = gk.softmax(np.array([1e4, 0, 0, 0, 0, 0]))
    assert np.all(np.isfinite(p))
    assert p[0] == pytest.approx(1.0)


# --- gradients: analytic vs central finite differences ---

@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n, d = 8, 16
    X = sparse.csr_matrix(rng.random((n, d)) * (rng.random((n, d)) < 0.4))
    y = rng.integers(0, gk.N_CLASSES, size=n)
    w = rng.normal(scale=0.3, size=(d, gk.N_CLASSES))
    b = rng.normal(scale=0.3, size=gk.N_CLASSES)
    l2 = 1e-3
    _, grad_w, grad_b = gk.loss_and_grads(X, y, w, b, l2)

    eps = 1e-6
    for _ in range(6):
        i, j = rng.integers(0, d), rng.integers(0, gk.N_CLASSES)
        wp, wm = w.copy(), w.copy()
        wp[i, j] += eps
        wm[i, j] -= eps
        lp, _, _ = gk.loss_and_grads(X, y, wp, b, l2)
        lm, _, _ = gk.loss_and_grads(X, y, wm, b, l2)
        numeric = (lp - lm) / (2 * eps)
        denom = max(abs(numeric), abs(grad_w[i, j]), 1e-8)
        assert abs(numeric - grad_w[i, j]) / denom < 1e-4
    for j in range(gk.N_CLASSES):
        bp, bm = b.copy(), b.copy()
        bp[j] += eps
        bm[j] -= eps
        lp, _, _ = gk.loss_and_grads(X, y, w, bp, l2)
        lm, _, _ = gk.loss_and_grads(X, y, w, bm, l2)
        numeric = (lp - lm) / (2 * eps)
        denom = max(abs(numeric), abs(grad_b[j]), 1e-8)
        assert abs(numeric - grad_b[j]) / denom < 1e-4


# --- training ---

def test_training_reduces_loss():
    X = gk.featurize([r.text for r in RECORDS], dim=2 ** 14)
    y = np.array([r.label.class_index for r in RECORDS])
    w0 = np.zeros((2 ** 14, gk.N_CLASSES))
    b0 = np.zeros(gk.N_CLASSES)
    initial, _, _ = gk.loss_and_grads(X, y, w0, b0, 1e-4)
    model = gk.train_arrays(X, y, gk.TrainConfig(dim=2 ** 14))
    final, _, _ = gk.loss_and_grads(X, y, model.weights, model.bias, 1e-4)
    assert final < initial


def test_training_is_deterministic_and_order_invariant():
    cfg = gk.TrainConfig(dim=2 ** 14, epochs=20)
    a = gk.train(RECORDS, cfg)
    b = gk.train(RECORDS, cfg)
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.bias, b.bias)
    # full-batch updates are row-order invariant up to float summation order
    c = gk.train(list(reversed(RECORDS)), cfg)
    assert np.allclose(a.weights, c.weights, atol=1e-9)
    assert np.allclose(a.bias, c.bias, atol=1e-9)


def test_training_empty_set_raises():
    with pytest.raises(EmptyTrainingSet):
        gk.train([], gk.TrainConfig(dim=64))


def test_training_degenerate_labels_flagged_not_fatal():
    same = [r for r in RECORDS if r.label.category is None][:6]
    model = gk.train(same, gk.TrainConfig(dim=2 ** 12, epochs=5))
    assert model.meta["degenerate_labels"] is True
    varied = gk.train(RECORDS[:20], gk.TrainConfig(dim=2 ** 12, epochs=5))
    assert varied.meta["degenerate_labels"] is False


def test_model_meta_records_config():
    model = gk.train(RECORDS[:12], gk.TrainConfig(dim=2 ** 12, epochs=3, seed=77))
    assert model.meta["epochs"] == 3
    assert model.meta["seed"] == 77
    assert model.meta["n_train"] == 12
    assert model.classes == CLASS_ORDER


# --- prediction ---

def test_predict_rows_are_distributions():
    model = gk.train(RECORDS[:30], gk.TrainConfig(dim=2 ** 13, epochs=10))
    dists = gk.predict_dist(model, [r.text for r in RECORDS[30:40]])
    assert dists.shape == (10, 6)
    assert np.allclose(dists.sum(axis=1), 1.0)
    assert np.all(dists >= 0)


def test_predict_dimension_mismatch():
    model = gk.train(RECORDS[:10], gk.TrainConfig(dim=2 ** 12, epochs=2))
    X = gk.featurize(["a rotor"], dim=2 ** 10)
    with pytest.raises(DimensionMismatch):
        gk.predict_from_features(model, X)


def test_zero_model_predicts_uniform():
    model = gk.Model(64, CLASS_ORDER, np.zeros((64, 6)), np.zeros(6), {})
    dists = gk.predict_dist(model, ["anything at all"])
    assert np.allclose(dists, 1 / 6)


# --- persistence ---

def test_model_save_is_byte_stable_and_round_trips(tmp_path):
    model = gk.train(RECORDS[:25], gk.TrainConfig(dim=2 ** 13, epochs=8))
    p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
    gk.save_model(model, str(p1))
    gk.save_model(model, str(p2))
    assert p1.read_bytes() == p2.read_bytes()
    loaded = gk.load_model(str(p1))
    texts = [r.text for r in RECORDS[25:30]]
    assert np.array_equal(gk.predict_dist(loaded, texts), gk.predict_dist(model, texts))
    assert loaded.meta == model.meta


def test_model_load_rejects_other_formats(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format": "something-else"}')
    with pytest.raises(InvalidInput):
        gk.load_model(str(path))


# --- external score files ---

def test_scores_round_trip(tmp_path):
    model = gk.train(RECORDS[:20], gk.TrainConfig(dim=2 ** 12, epochs=5))
    ids = [r.id for r in RECORDS[20:26]]
    dists = gk.predict_dist(model, [r.text for r in RECORDS[20:26]])
    path = tmp_path / "scores.csv"
    gk.write_scores(str(path), ids, dists)
    loaded = gk.load_scores(str(path))
    aligned = gk.align_scores(loaded, ids)
    assert np.array_equal(aligned, dists)


def test_scores_reject_bad_header(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("id,a,b\nx,0.5,0.5\n")
    with pytest.raises(InvalidInput):
        gk.load_scores(str(path))


def test_scores_reject_non_distribution(tmp_path):
    path = tmp_path / "s.csv"
    header = "id," + ",".join(CLASS_ORDER)
    path.write_text(header + "\nrec-1,0.9,0.9,0.0,0.0,0.0,0.0\n")
    with pytest.raises(InvalidInput):
        gk.load_scores(str(path))


def test_align_scores_reports_missing_id(tmp_path):
    path = tmp_path / "s.csv"
    header = "id," + ",".join(CLASS_ORDER)
    path.write_text(header + "\nrec-1,1.0,0.0,0.0,0.0,0.0,0.0\n")
    scores = gk.load_scores(str(path))
    with pytest.raises(InvalidInput):
        gk.align_scores(scores, ["rec-1", "rec-2"])
