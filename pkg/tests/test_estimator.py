"""Sklearn-facing estimator: API conformance and evidential outputs."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from evifuse import EvidentialMultiviewClassifier
from evifuse.data import generate_synthetic
from evifuse.opinions import conflictive_degree, evidence_to_opinion


@pytest.fixture(scope="module")
def fitted():
    ds = generate_synthetic(2, 3, 240, (6, 4), 5.0, seed=0)
    views = [v.copy() for v in ds.views]
    y = ds.class_ids.copy()
    model = EvidentialMultiviewClassifier(
        hidden_layer_sizes=(16,), epochs=40, seed=0
    ).fit(views, y)
    return model, views, y


def test_fit_predict_accuracy(fitted):
    model, views, y = fitted
    assert (model.predict(views) == y).mean() >= 0.95


def test_classes_sorted_and_attributes(fitted):
    model, views, _ = fitted
    np.testing.assert_array_equal(model.classes_, [0, 1, 2])
    assert model.view_dims_ == (6, 4)
    assert len(model.trace_.breakdowns) == 40


def test_predict_proba_rows_sum_to_one(fitted):
    model, views, _ = fitted
    proba = model.predict_proba(views)
    assert proba.shape == (240, 3)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)
    assert (proba > 0).all()


def test_uncertainty_and_reliability_complement(fitted):
    model, views, _ = fitted
    u = model.predict_uncertainty(views)
    r = model.predict_reliability(views)
    assert ((u > 0) & (u <= 1)).all()
    np.testing.assert_allclose(u + r, 1.0, atol=1e-12)


def test_conflict_scores_match_pairwise_opinion_oracle(fitted):
    model, views, _ = fitted
    scores = model.conflict_scores(views)
    assert scores.shape == (240,)
    assert ((scores >= 0) & (scores <= 1)).all()
    scaled = model._apply_scaler([np.asarray(v) for v in views])
    alphas = model.net_.alphas(scaled)
    for i in (0, 57, 239):
        a = evidence_to_opinion((alphas[0, i] - 1.0))
        b = evidence_to_opinion((alphas[1, i] - 1.0))
        assert scores[i] == pytest.approx(conflictive_degree(a, b), abs=1e-12)


def test_string_labels_round_trip():
    ds = generate_synthetic(2, 2, 80, 3, 5.0, seed=2)
    y = np.array(["no", "yes"])[ds.class_ids]
    model = EvidentialMultiviewClassifier(hidden_layer_sizes=(8,), epochs=30, seed=0)
    model.fit(list(ds.views), y)
    preds = model.predict(list(ds.views))
    assert set(preds) <= {"no", "yes"}
    assert (preds == y).mean() >= 0.9
    np.testing.assert_array_equal(model.classes_, ["no", "yes"])


def test_single_matrix_input_treated_as_one_view():
    ds = generate_synthetic(1, 2, 60, 4, 5.0, seed=3)
    model = EvidentialMultiviewClassifier(hidden_layer_sizes=(8,), epochs=30, seed=0)
    model.fit(ds.views[0], ds.class_ids)
    assert model.view_dims_ == (4,)
    assert model.conflict_scores(ds.views[0]).max() == 0.0


def test_get_set_params_and_clone():
    model = EvidentialMultiviewClassifier(epochs=5, gamma=0.5)
    params = model.get_params()
    assert params["epochs"] == 5 and params["gamma"] == 0.5
    twin = clone(model)
    assert twin.get_params() == params
    model.set_params(epochs=7)
    assert model.epochs == 7


def test_unfitted_predict_raises():
    model = EvidentialMultiviewClassifier()
    with pytest.raises(NotFittedError):
        model.predict([np.zeros((3, 2))])


def test_wrong_view_count_or_width_raises(fitted):
    model, views, _ = fitted
    with pytest.raises(ValueError, match="views"):
        model.predict([views[0]])
    with pytest.raises(ValueError, match="width"):
        model.predict([views[0], views[0]])


def test_label_length_mismatch():
    model = EvidentialMultiviewClassifier(epochs=1)
    with pytest.raises(ValueError, match="label"):
        model.fit([np.zeros((4, 2))], np.array([0, 1]))


def test_deterministic_refit():
    ds = generate_synthetic(2, 2, 60, 3, 4.0, seed=5)
    views, y = list(ds.views), ds.class_ids
    a = EvidentialMultiviewClassifier(hidden_layer_sizes=(8,), epochs=10, seed=1)
    b = EvidentialMultiviewClassifier(hidden_layer_sizes=(8,), epochs=10, seed=1)
    pa = a.fit(views, y).predict_proba(views)
    pb = b.fit(views, y).predict_proba(views)
    np.testing.assert_array_equal(pa, pb)
