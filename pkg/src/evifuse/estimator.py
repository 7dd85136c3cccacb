"""Scikit-learn style front end for the evidential multi-view classifier.

The estimator wraps the per-view evidence networks behind the familiar
``fit`` / ``predict`` / ``predict_proba`` surface. Multi-view input is a list
of V feature matrices sharing their row order; labels are arbitrary class
values, mapped to ``classes_`` as in other sklearn classifiers. Beyond point
predictions it exposes the quantities this model exists for: per-instance
fused uncertainty, reliability, and pairwise view-conflict scores.
"""

from __future__ import annotations

from types import SimpleNamespace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from .losses import LossConfig
from .network import EvidentialNet, NetConfig

__all__ = ["EvidentialMultiviewClassifier"]


class EvidentialMultiviewClassifier(BaseEstimator, ClassifierMixin):
    """Evidential classifier over multiple feature views.

    Parameters
    ----------
    hidden_layer_sizes : tuple of int, default (64,)
        Hidden widths shared by every view's network.
    head : {"softplus", "relu"}, default "softplus"
        Evidence activation.
    optimizer : {"adam", "sgd"}, default "adam"
    learning_rate : float, default 1e-3
    epochs : int, default 60
    batch_size : int, default 64
    anneal_epochs : int, default 10
        Horizon T of the misleading-evidence penalty ramp min(1, t/T).
    beta : float, default 1.0
        Weight of the per-view accuracy losses.
    gamma : float, default 1.0
        Weight of the pairwise view-consistency penalty.
    standardize : bool, default True
        Standardize each view with statistics of the fit data.
    normalize_inputs : bool, default True
        Project each view vector onto the unit sphere inside the network.
    seed : int, default 0

    Attributes
    ----------
    classes_ : ndarray
        Sorted class values seen in ``fit``.
    net_ : EvidentialNet
        The trained per-view networks.
    trace_ : TrainTrace
        Per-epoch loss history.
    view_dims_ : tuple of int
        Feature width of each view.
    """

    def __init__(
        self,
        hidden_layer_sizes=(64,),
        head="softplus",
        optimizer="adam",
        learning_rate=1e-3,
        epochs=60,
        batch_size=64,
        anneal_epochs=10,
        beta=1.0,
        gamma=1.0,
        standardize=True,
        normalize_inputs=True,
        seed=0,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.head = head
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.anneal_epochs = anneal_epochs
        self.beta = beta
        self.gamma = gamma
        self.standardize = standardize
        self.normalize_inputs = normalize_inputs
        self.seed = seed

    def _validate_views(self, Xs, fitting: bool) -> list[np.ndarray]:
        if isinstance(Xs, np.ndarray) and Xs.ndim == 2:
            Xs = [Xs]
        views = [check_array(x, dtype=np.float64) for x in Xs]
        if not views:
            raise ValueError("need at least one view")
        n = views[0].shape[0]
        if any(v.shape[0] != n for v in views):
            raise ValueError("views disagree on instance count")
        if not fitting:
            check_is_fitted(self, "net_")
            if len(views) != len(self.view_dims_):
                raise ValueError(
                    f"expected {len(self.view_dims_)} views, got {len(views)}"
                )
            for i, (v, d) in enumerate(zip(views, self.view_dims_)):
                if v.shape[1] != d:
                    raise ValueError(f"view {i} has width {v.shape[1]}, expected {d}")
        return views

    def fit(self, Xs, y):
        """Train the per-view networks on V feature matrices and labels."""
        views = self._validate_views(Xs, fitting=True)
        y = column_or_1d(y)
        if y.shape[0] != views[0].shape[0]:
            raise ValueError("label count does not match instance count")
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ValueError("need at least 2 classes")
        k = self.classes_.size
        self.view_dims_ = tuple(v.shape[1] for v in views)
        if self.standardize:
            means = [v.mean(axis=0) for v in views]
            stds = [v.std(axis=0) for v in views]
            self.scaler_ = (means, [np.where(s < 1e-8, 1.0, s) for s in stds])
            views = self._apply_scaler(views)
        else:
            self.scaler_ = None
        hidden = tuple(int(h) for h in np.atleast_1d(self.hidden_layer_sizes))
        chains = tuple((d, *hidden, k) for d in self.view_dims_)
        net_config = NetConfig(
            layer_sizes=chains,
            head=self.head,
            optimizer=self.optimizer,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            normalize_inputs=self.normalize_inputs,
        )
        labels = np.zeros((encoded.size, k))
        labels[np.arange(encoded.size), encoded] = 1.0
        self.net_ = EvidentialNet(net_config)
        self.trace_ = self.net_.train(
            SimpleNamespace(views=views, labels=labels),
            LossConfig(T=self.anneal_epochs, beta=self.beta, gamma=self.gamma),
        )
        return self

    def _apply_scaler(self, views):
        if self.scaler_ is None:
            return views
        means, scales = self.scaler_
        return [(v - m) / s for v, m, s in zip(views, means, scales)]

    def _fused_alpha(self, Xs) -> np.ndarray:
        views = self._apply_scaler(self._validate_views(Xs, fitting=False))
        return self.net_.alphas(views).mean(axis=0)

    def predict(self, Xs):
        """Most plausible class per instance, from the fused opinion."""
        fused = self._fused_alpha(Xs)
        return self.classes_[fused.argmax(axis=1)]

    def predict_proba(self, Xs):
        """Fused projected class probabilities (uniform base rates)."""
        fused = self._fused_alpha(Xs)
        return fused / fused.sum(axis=1, keepdims=True)

    def predict_uncertainty(self, Xs):
        """Fused uncertainty mass u = K / S per instance, in (0, 1]."""
        fused = self._fused_alpha(Xs)
        return self.classes_.size / fused.sum(axis=1)

    def predict_reliability(self, Xs):
        """1 - u per instance."""
        return 1.0 - self.predict_uncertainty(Xs)

    def conflict_scores(self, Xs):
        """Mean pairwise conflictive degree between views, per instance.

        Zero for single-view data (no pairs).
        """
        views = self._apply_scaler(self._validate_views(Xs, fitting=False))
        alphas = self.net_.alphas(views)
        v, n, k = alphas.shape
        if v < 2:
            return np.zeros(n)
        strength = alphas.sum(axis=-1)
        probs = alphas / strength[..., None]
        unc = k / strength
        total = np.zeros(n)
        for i in range(v):
            for j in range(i + 1, v):
                c_p = 0.5 * np.abs(probs[i] - probs[j]).sum(axis=-1)
                total += c_p * (1.0 - unc[i]) * (1.0 - unc[j])
        return total / (v * (v - 1) / 2)
