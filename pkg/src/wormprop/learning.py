"""Training and evaluation of the compiled network's bound parameters.

Training runs projected gradient descent on a differentiable surrogate of
the node-mismatch loss, through the relaxed global network under a rising
temperature schedule.  All reported metrics come from the hard (exact)
forward pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .compiler import LARGE_DEFAULT, auto_large, build_global_network
from .exceptions import DimensionError, NumericError, PreconditionError
from .graph import WsnGraph
from .network import HARD, RELAXED, backward, forward
from .status import decode_flat, encode_flat
from .validation import as_rng, check_label_matrix

_TINY = 1e-12
_INNOCENT_FLOOR = 1e-9

INIT_SCHEMES = ("uniform01", "paper-prior")


@dataclass(frozen=True)
class ModelParams:
    """Trainable view of a graph's parameters: per-edge per-worm weights in
    the graph's canonical edge order, and per-node per-worm thresholds."""

    edge_weights: np.ndarray
    thresholds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "edge_weights",
                           np.asarray(self.edge_weights, dtype=np.float64))
        object.__setattr__(self, "thresholds",
                           np.asarray(self.thresholds, dtype=np.float64))

    @property
    def worm_count(self) -> int:
        return int(self.thresholds.shape[1])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.edge_weights.ravel(), self.thresholds.ravel()])

    @classmethod
    def from_vector(cls, vector, edge_count: int, node_count: int,
                    worm_count: int) -> "ModelParams":
        vector = np.asarray(vector, dtype=np.float64)
        split = edge_count * worm_count
        return cls(vector[:split].reshape(edge_count, worm_count),
                   vector[split:].reshape(node_count, worm_count))

    @classmethod
    def from_graph(cls, graph: WsnGraph) -> "ModelParams":
        return cls(graph.edge_weights.copy(), graph.thresholds.copy())

    def projected(self) -> "ModelParams":
        return ModelParams(np.maximum(self.edge_weights, 0.0),
                           np.maximum(self.thresholds, 0.0))

    def apply_to(self, graph: WsnGraph) -> WsnGraph:
        return graph.with_params(self.thresholds, self.edge_weights,
                                 worm_count=self.worm_count)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 100
    batch_size: int = 32
    tau_start: float = 2.0
    tau_end: float = 20.0
    rng_seed: int | None = None
    init_scheme: str = "uniform01"
    large: float | None = None  # None: just-dominant constant per rebuild
    keep_best: bool = True      # return the epoch with best hard accuracy

    def __post_init__(self):
        if self.learning_rate < 0 or self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("learning rate must be >= 0; epochs and batch size positive")
        if self.tau_start <= 0 or self.tau_end < self.tau_start:
            raise ValueError("temperature schedule must be positive and non-decreasing")
        if self.init_scheme not in INIT_SCHEMES:
            raise ValueError(f"init_scheme must be one of {INIT_SCHEMES}")

    def tau_at(self, epoch: int) -> float:
        if self.epochs == 1:
            return self.tau_start
        frac = epoch / (self.epochs - 1)
        return self.tau_start + (self.tau_end - self.tau_start) * frac


@dataclass(frozen=True)
class Metrics:
    f1: float
    precision: float
    recall: float
    accuracy: float
    mean_node_loss: float
    sample_count: int


@dataclass
class EpochRecord:
    epoch: int
    train_surrogate_loss: float
    val_hard_loss: float
    accuracy: float


class TrainingDivergedError(NumericError):
    """Raised when the surrogate loss becomes non-finite; carries the
    history collected so far."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


def init_params(graph: WsnGraph, rng, scheme: str = "uniform01") -> ModelParams:
    """uniform01 draws everything from U[0,1]; paper-prior sets each edge
    weight deterministically to 1/(in_degree(target)+k) and draws only the
    thresholds."""
    rng = as_rng(rng)
    k = graph.worm_count
    thresholds = rng.uniform(0.0, 1.0, size=(graph.node_count, k))
    if scheme == "uniform01":
        weights = rng.uniform(0.0, 1.0, size=(graph.edge_count, k))
    elif scheme == "paper-prior":
        indeg = np.array([graph.in_degree(int(v)) for v in graph.edge_dst])
        worms = np.arange(1, k + 1)
        weights = 1.0 / (indeg[:, None] + worms[None, :])
        weights = weights.reshape(graph.edge_count, k)
    else:
        raise ValueError(f"unknown init scheme {scheme!r}")
    return ModelParams(weights, thresholds)


def _pool_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    """Accept a SamplePool-like object (with .initial/.final) or a pair of
    label matrices."""
    if hasattr(samples, "initial") and hasattr(samples, "final"):
        return np.asarray(samples.initial), np.asarray(samples.final)
    initial, final = samples
    return np.asarray(initial), np.asarray(final)


def surrogate_loss(soft_output, target) -> float:
    """Per-node cross-entropy between the (K+1)-way distribution derived
    from a relaxed output column (K worm scores plus the innocent
    complement, renormalized) and the target label; mean over nodes.

    `soft_output` is a complex (K, N) matrix or flat (N*K,) vector whose
    real parts are the worm scores; `target` is an encoded status matrix of
    the same shape or a label vector.
    """
    out = np.asarray(soft_output)
    if out.ndim == 2:  # (K, N) matrix -> flat node-major
        out = np.ascontiguousarray(out.T).reshape(-1)
    target = np.asarray(target)
    if target.ndim == 2:
        k = target.shape[0]
        labels = decode_flat(np.ascontiguousarray(target.T).reshape(-1), k).labels
    else:
        labels = target.astype(np.int64)
        if labels.size == 0:
            raise DimensionError("empty target")
        k = out.size // labels.size
    loss, _ = _surrogate_loss_grad(out.reshape(-1, 1), labels.reshape(1, -1), k)
    return loss


def _surrogate_loss_grad(out_flat: np.ndarray, labels: np.ndarray, worm_count: int):
    """Mean cross-entropy over (samples x nodes) plus the cotangent of the
    flat complex output, for batched columns.

    out_flat: (N*K, B) complex; labels: (B, N) ints.
    """
    k = worm_count
    n_slots, batch = out_flat.shape
    n_nodes = n_slots // k
    if labels.shape != (batch, n_nodes):
        raise DimensionError("target labels do not match the output shape")
    scores = out_flat.real.T.reshape(batch, n_nodes, k)
    if not np.all(np.isfinite(scores)):
        raise NumericError("non-finite surrogate scores")
    sum_s = scores.sum(axis=2)
    u0_raw = 1.0 - sum_s
    clipped = u0_raw < _INNOCENT_FLOOR
    u0 = np.where(clipped, _INNOCENT_FLOOR, u0_raw)
    total = sum_s + u0
    is_worm = labels > 0
    worm_idx = np.where(is_worm, labels - 1, 0)
    target_score = np.take_along_axis(scores, worm_idx[:, :, None], axis=2)[:, :, 0]
    u_t = np.where(is_worm, target_score, u0)
    u_t_eff = np.maximum(u_t, _TINY)
    losses = np.log(total) - np.log(u_t_eff)
    loss = float(losses.mean())
    # cotangents of the per-slot scores
    denom = batch * n_nodes
    g = np.zeros_like(scores)
    # d log(total) / ds_j: 0 when u0 unclipped (total is constant), else 1/total
    g += (clipped / total)[:, :, None]
    # -d log(u_t) / ds_j
    live = u_t > _TINY
    innocent_unclipped = (~is_worm) & (~clipped) & live
    g += np.where(innocent_unclipped, 1.0 / u_t_eff, 0.0)[:, :, None]
    worm_live = is_worm & live
    target_grad = np.where(worm_live, -1.0 / u_t_eff, 0.0)
    np.put_along_axis(g, worm_idx[:, :, None],
                      np.take_along_axis(g, worm_idx[:, :, None], axis=2)
                      + target_grad[:, :, None], axis=2)
    g /= denom
    grad_flat = np.ascontiguousarray(g.reshape(batch, n_slots).T).astype(np.complex128)
    return loss, grad_flat


def _bound_net(graph: WsnGraph, params: ModelParams, large: float | None):
    """Global network for `graph` under `params`; `large` None picks a
    just-dominant self-link constant (hard semantics are unaffected)."""
    bound = params.apply_to(graph)
    return bound, build_global_network(
        bound, auto_large(bound) if large is None else large)


def _hard_predict(graph: WsnGraph, params: ModelParams, initial: np.ndarray,
                  large: float | None = None) -> np.ndarray:
    """Hard-forward final labels for a batch of initial label vectors."""
    bound, net = _bound_net(graph, params, large)
    k = bound.worm_count
    inputs = np.stack([encode_flat(row, k) for row in initial], axis=1)
    out, _ = forward(net, inputs, mode=HARD, early_exit=True, keep_trace=False)
    return np.stack([decode_flat(out[:, b], k).labels
                     for b in range(out.shape[1])])


def compute_metrics(predicted: np.ndarray, truth: np.ndarray,
                    worm_count: int) -> Metrics:
    """Accuracy over all node labels (K+1 classes), macro precision /
    recall / F1 over the K worm classes, and the mean node-mismatch loss."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise DimensionError("prediction and truth shapes differ")
    accuracy = float(np.mean(predicted == truth))
    mean_loss = float(np.mean(predicted != truth))
    precisions, recalls, f1s = [], [], []
    for k in range(1, worm_count + 1):
        tp = int(np.sum((predicted == k) & (truth == k)))
        fp = int(np.sum((predicted == k) & (truth != k)))
        fn = int(np.sum((predicted != k) & (truth == k)))
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        precisions.append(prec)
        recalls.append(rec)
        f1s.append(f1)
    return Metrics(
        f1=float(np.mean(f1s)),
        precision=float(np.mean(precisions)),
        recall=float(np.mean(recalls)),
        accuracy=accuracy,
        mean_node_loss=mean_loss,
        sample_count=int(predicted.shape[0]),
    )


def evaluate(graph: WsnGraph, params: ModelParams, samples,
             large: float | None = None) -> Metrics:
    """Hard-forward predictions for every sample, scored against the stored
    finals."""
    initial, final = _pool_arrays(samples)
    if initial.shape[0] == 0:
        raise PreconditionError("samples must be nonempty")
    predicted = _hard_predict(graph, params, initial, large)
    return compute_metrics(predicted, final, params.worm_count)


def random_baseline(samples, worm_count: int, rng) -> Metrics:
    """Uniform random label per node over {0..K}, scored like evaluate."""
    initial, final = _pool_arrays(samples)
    if initial.shape[0] == 0:
        raise PreconditionError("samples must be nonempty")
    rng = as_rng(rng)
    predicted = rng.integers(0, worm_count + 1, size=final.shape)
    return compute_metrics(predicted, final, worm_count)


def train(graph: WsnGraph, pool, config: TrainConfig) -> tuple[ModelParams, list]:
    """Gradient descent (Adam steps, projected to non-negative parameters)
    on the surrogate loss through the relaxed global network.  Returns the
    trained parameters and the per-epoch history (entry 0 is the pre-update
    state); all history metrics come from the hard forward pass."""
    initial, final = _pool_arrays(pool)
    initial = check_label_matrix(initial, graph.node_count, graph.worm_count)
    final = check_label_matrix(final, graph.node_count, graph.worm_count)
    q = initial.shape[0]
    if q == 0:
        raise PreconditionError("training pool is empty")
    rng = as_rng(config.rng_seed)
    params = init_params(graph, rng, config.init_scheme)
    k = graph.worm_count
    inputs = np.stack([encode_flat(row, k) for row in initial], axis=1)
    history: list[EpochRecord] = []

    def record(epoch, surrogate):
        val = evaluate(graph, params, (initial, final), config.large)
        history.append(EpochRecord(epoch=epoch,
                                   train_surrogate_loss=surrogate,
                                   val_hard_loss=val.mean_node_loss,
                                   accuracy=val.accuracy))

    _, net = _bound_net(graph, params, config.large)
    loss0, _ = _surrogate_loss_grad(
        forward(net, inputs, mode=RELAXED, tau=config.tau_at(0),
                keep_trace=False)[0], final, k)
    record(0, loss0)
    best_params, best_acc = params, history[0].accuracy
    n_params = params.to_vector().size
    moment1 = np.zeros(n_params)
    moment2 = np.zeros(n_params)
    steps = 0
    beta1, beta2, adam_eps = 0.9, 0.999, 1e-8
    for epoch in range(config.epochs):
        tau = config.tau_at(epoch)
        order = rng.permutation(q)
        epoch_losses = []
        for start in range(0, q, config.batch_size):
            batch = order[start:start + config.batch_size]
            _, net = _bound_net(graph, params, config.large)
            out, trace = forward(net, inputs[:, batch], mode=RELAXED, tau=tau)
            loss, gout = _surrogate_loss_grad(out, final[batch], k)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"surrogate loss diverged at epoch {epoch}", history)
            epoch_losses.append(loss)
            grads = backward(net, trace, gout)
            steps += 1
            moment1 = beta1 * moment1 + (1.0 - beta1) * grads
            moment2 = beta2 * moment2 + (1.0 - beta2) * grads ** 2
            m_hat = moment1 / (1.0 - beta1 ** steps)
            v_hat = moment2 / (1.0 - beta2 ** steps)
            vec = params.to_vector() - config.learning_rate * m_hat / (
                np.sqrt(v_hat) + adam_eps)
            params = ModelParams.from_vector(
                vec, graph.edge_count, graph.node_count, k).projected()
        record(epoch + 1, float(np.mean(epoch_losses)))
        if history[-1].accuracy >= best_acc:
            best_params, best_acc = params, history[-1].accuracy
    return (best_params if config.keep_best else params), history
