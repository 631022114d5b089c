"""Scikit-learn style estimator over the compiled propagation network.

Samples are snapshot pairs: X rows are initial label vectors and y rows the
corresponding final label vectors, one column per sensor.  Fitting learns
the edge weights and node thresholds by gradient descent on the relaxed
network; prediction runs the exact hard forward with the learned values.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .graph import WsnGraph
from .learning import ModelParams, TrainConfig, _hard_predict, compute_metrics, train
from .validation import check_label_matrix


class WormPropagationEstimator(BaseEstimator):
    """Learns propagation dynamics from initial/final infection snapshots.

    Parameters
    ----------
    graph : WsnGraph
        The (known) communication topology; its own thresholds/weights are
        ignored, only the structure is used.
    learning_rate, epochs, batch_size : SGD settings.
    tau_start, tau_end : temperature schedule of the relaxed forward pass
        (non-decreasing over epochs).
    init_scheme : "uniform01" or "paper-prior".
    random_state : seed for initialization and batch shuffling.
    """

    def __init__(self, graph: WsnGraph | None = None, learning_rate: float = 0.05,
                 epochs: int = 100, batch_size: int = 32, tau_start: float = 2.0,
                 tau_end: float = 20.0, init_scheme: str = "uniform01",
                 random_state=None, large: float | None = None):
        self.graph = graph
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.tau_start = tau_start
        self.tau_end = tau_end
        self.init_scheme = init_scheme
        self.random_state = random_state
        self.large = large

    def _check_graph(self) -> WsnGraph:
        if self.graph is None:
            raise ValueError("a WsnGraph must be supplied via the `graph` parameter")
        return self.graph

    def _validate(self, X, reset: bool = False) -> np.ndarray:
        graph = self._check_graph()
        X = check_label_matrix(X, graph.node_count, graph.worm_count)
        if reset:
            self.n_features_in_ = X.shape[1]
        return X

    def fit(self, X, y) -> "WormPropagationEstimator":
        """Learn edge weights and thresholds from (initial, final) rows."""
        graph = self._check_graph()
        X = self._validate(X, reset=True)
        y = check_label_matrix(y, graph.node_count, graph.worm_count)
        if X.shape != y.shape:
            raise ValueError("X and y must have identical shapes")
        config = TrainConfig(
            learning_rate=self.learning_rate, epochs=self.epochs,
            batch_size=self.batch_size, tau_start=self.tau_start,
            tau_end=self.tau_end, rng_seed=self.random_state,
            init_scheme=self.init_scheme, large=self.large,
        )
        self.params_, self.history_ = train(graph, (X, y), config)
        self.n_iter_ = self.epochs
        return self

    def _fitted_params(self) -> ModelParams:
        if not hasattr(self, "params_"):
            raise NotFittedError("this estimator is not fitted yet; call fit first")
        return self.params_

    def predict(self, X) -> np.ndarray:
        """Exact final label vectors under the learned dynamics."""
        params = self._fitted_params()
        X = self._validate(X)
        return _hard_predict(self._check_graph(), params, X, self.large)

    def score(self, X, y) -> float:
        """Mean per-node label accuracy (1 - mean node-mismatch loss)."""
        graph = self._check_graph()
        y = check_label_matrix(y, graph.node_count, graph.worm_count)
        predicted = self.predict(X)
        return compute_metrics(predicted, y, graph.worm_count).accuracy
