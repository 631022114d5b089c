"""Compile a sensor graph into the layered complex network that simulates it.

One propagation step becomes a local block:

  stage 1      N*K -> N*K   linear: edge weights on matching worm slots plus
                            a dominance constant on each (node, worm) self
                            link; bias puts the worm index in the imaginary
                            part; threshold gates apply theta[v][k].
  comparisons  P levels of two layers each; level p maps per-node arrays of
               size K/2^(p-1) down to K/2^p.  A pair (A, B) (B always carries
               the larger worm index) passes through as
                   A + (B - A) * [Re(B - A) >= 0]
               realized by an identity neuron for A and a threshold(0)
               neuron emitting the difference, summed by the second layer.
               After all levels each node holds (max incoming sum, winning
               worm index), ties resolved to the larger index.
  format       two layers turning each node's (sum, index) pair back into a
               one-hot column: a fan-out layer thresholding the index at
               k = 1..K (a unary code), then a +/-1 mixing layer whose
               one-hot gate at worm l fires iff the code sums above l-1.

The global network repeats the block node_count times with shared parameter
bindings, computing the full propagation function exactly in hard mode.

Exactness caveat: the block only sees incoming weight sums.  A node whose
threshold is exactly 0 while its incoming sum is exactly 0 is decided by the
simulator's carried-by-a-neighbor rule, which the network cannot observe;
with positive thresholds (the generated instances, almost surely) hard
forward and simulator agree bit-for-bit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import ConfigurationError, StructureError
from .graph import WsnGraph
from .network import (
    HARD,
    ActivationKind,
    BindingTable,
    LayerSpec,
    NetworkSpec,
    forward,
)
from .simulate import propagate
from .status import decode_flat, encode_flat
from .validation import as_rng

LARGE_DEFAULT = 1000.0


def _levels(worm_count: int) -> int:
    k = int(worm_count)
    if k < 1 or k & (k - 1):
        raise StructureError(f"worm count must be a power of two, got {k}")
    return k.bit_length() - 1


@dataclass(frozen=True)
class LocalBlockPlan:
    """The 2P+4-layer block: stage 1, P comparison level pairs, and the two
    format-adjustment layers."""

    stage1: LayerSpec
    comparison_levels: tuple
    format_adjust: tuple
    node_count: int
    worm_count: int

    @property
    def levels(self) -> int:
        return _levels(self.worm_count)

    @property
    def layer_count(self) -> int:
        """Counting the input layer, per the construction's convention."""
        return 2 * self.levels + 4

    def layers(self) -> list:
        out = [self.stage1]
        for c1, c2 in self.comparison_levels:
            out.extend((c1, c2))
        out.extend(self.format_adjust)
        return out


def dominance_bound(graph: WsnGraph) -> float:
    """Any self-link constant strictly above this simulates correctly."""
    return graph.max_in_weight_sum() + (float(graph.thresholds.max())
                                        if graph.thresholds.size else 0.0)


def auto_large(graph: WsnGraph) -> float:
    """A just-dominant self-link constant.

    Hard-mode exactness only needs dominance; a value barely above the bound
    keeps the relaxed network's gate margins moderate so gradients survive,
    where the conventional 1000 saturates every downstream gate.
    """
    return max(2.0, 1.25 * dominance_bound(graph) + 0.5)


def check_dominance(graph: WsnGraph, large: float) -> None:
    bound = dominance_bound(graph)
    if not large > bound:
        raise ConfigurationError(
            f"dominance constant {large} must exceed max incoming weight sum "
            f"plus max threshold ({bound})"
        )


def build_stage1_layer(graph: WsnGraph, large: float = LARGE_DEFAULT) -> LayerSpec:
    """Edge weights on matching worm slots, `large` self links, worm-index
    bias on the imaginary part, threshold gates."""
    check_dominance(graph, large)
    n, k = graph.node_count, graph.worm_count
    dim = n * k
    worms = np.arange(k)
    # edge entries: row v*K + (k-1), col u*K + (k-1)
    rows = (graph.edge_dst[:, None] * k + worms[None, :]).ravel()
    cols = (graph.edge_src[:, None] * k + worms[None, :]).ravel()
    data = graph.edge_weights.ravel().astype(np.complex128)
    # self links
    diag = np.arange(dim)
    rows = np.concatenate([rows, diag])
    cols = np.concatenate([cols, diag])
    data = np.concatenate([data, np.full(dim, large, dtype=np.complex128)])
    weight = sp.coo_matrix((data, (rows, cols)), shape=(dim, dim)).tocsr()
    bias = np.tile(1j * (worms + 1).astype(np.complex128), n)
    acts = [ActivationKind.threshold(graph.thresholds[v, w])
            for v in range(n) for w in range(k)]
    return LayerSpec(weight, bias, acts)


def build_comparison_levels(worm_count: int, node_count: int) -> list:
    """P pairs of layers reducing each node's K slots to the single
    (max sum, winning index) value, larger index winning ties."""
    p_levels = _levels(worm_count)
    n = node_count
    levels = []
    size = worm_count
    for _ in range(p_levels):
        half = size // 2
        # first layer: per pair, a pass-through neuron for A and a gated
        # difference neuron for B - A
        rows, cols, data = [], [], []
        acts1 = []
        for v in range(n):
            base = v * size
            for j in range(half):
                a_col, b_col = base + 2 * j, base + 2 * j + 1
                keep_row, diff_row = base + 2 * j, base + 2 * j + 1
                rows.append(keep_row)
                cols.append(a_col)
                data.append(1.0)
                rows.append(diff_row)
                cols.append(b_col)
                data.append(1.0)
                rows.append(diff_row)
                cols.append(a_col)
                data.append(-1.0)
        for v in range(n):
            for j in range(half):
                acts1.extend((ActivationKind.identity(), ActivationKind.threshold(0.0)))
        w1 = sp.coo_matrix((np.array(data, dtype=np.complex128), (rows, cols)),
                           shape=(n * size, n * size)).tocsr()
        layer1 = LayerSpec(w1, np.zeros(n * size, dtype=np.complex128), acts1)
        # second layer: sum each pair
        rows, cols, data = [], [], []
        for v in range(n):
            for j in range(half):
                out_row = v * half + j
                rows.extend((out_row, out_row))
                cols.extend((v * size + 2 * j, v * size + 2 * j + 1))
                data.extend((1.0, 1.0))
        w2 = sp.coo_matrix((np.array(data, dtype=np.complex128), (rows, cols)),
                           shape=(n * half, n * size)).tocsr()
        layer2 = LayerSpec(w2, np.zeros(n * half, dtype=np.complex128),
                           [ActivationKind.identity()] * (n * half))
        levels.append((layer1, layer2))
        size = half
    return levels


def build_format_adjustment(worm_count: int, node_count: int) -> tuple:
    """Two layers mapping each node's (sum, index) pair to its one-hot
    column (all-zero when the index is 0)."""
    n, k = node_count, worm_count
    # fan-out: neuron (v, w) reads node v's pair and fires iff index >= w
    rows = np.arange(n * k)
    cols = np.repeat(np.arange(n), k)
    w1 = sp.coo_matrix((np.ones(n * k, dtype=np.complex128), (rows, cols)),
                       shape=(n * k, n)).tocsr()
    acts1 = [ActivationKind.index(w + 1) for _ in range(n) for w in range(k)]
    layer1 = LayerSpec(w1, np.zeros(n * k, dtype=np.complex128), acts1)
    # mixing: +1 below or at the target worm, -1 above; fires iff the unary
    # code sums strictly above l-1, which happens exactly at the winner
    rows, cols, data = [], [], []
    for v in range(n):
        for l in range(1, k + 1):
            for w in range(1, k + 1):
                rows.append(v * k + (l - 1))
                cols.append(v * k + (w - 1))
                data.append(1.0 if w <= l else -1.0)
    w2 = sp.coo_matrix((np.array(data, dtype=np.complex128), (rows, cols)),
                       shape=(n * k, n * k)).tocsr()
    # the winner level's sum is exactly its worm index and the level above
    # shares that sum, so the cut sits between them at a half-integer
    acts2 = [ActivationKind.one_hot(l + 0.5) for _ in range(n) for l in range(k)]
    layer2 = LayerSpec(w2, np.zeros(n * k, dtype=np.complex128), acts2)
    return layer1, layer2


def build_block_plan(graph: WsnGraph, large: float = LARGE_DEFAULT) -> LocalBlockPlan:
    return LocalBlockPlan(
        stage1=build_stage1_layer(graph, large),
        comparison_levels=tuple(build_comparison_levels(graph.worm_count,
                                                        graph.node_count)),
        format_adjust=build_format_adjustment(graph.worm_count, graph.node_count),
        node_count=graph.node_count,
        worm_count=graph.worm_count,
    )


def _bindings(graph: WsnGraph) -> BindingTable:
    """Edge weights first (canonical edge order, worm-minor), then
    thresholds (node-major, worm-minor); all sites sit in layer 0."""
    k = graph.worm_count
    names = []
    weight_sites = []
    theta_sites = []
    for i in range(graph.edge_count):
        u, v = int(graph.edge_src[i]), int(graph.edge_dst[i])
        for w in range(k):
            pidx = i * k + w
            names.append(f"w[{u}->{v}][{w + 1}]")
            weight_sites.append((pidx, 0, v * k + w, u * k + w))
    base = graph.edge_count * k
    for v in range(graph.node_count):
        for w in range(k):
            names.append(f"theta[{v}][{w + 1}]")
            theta_sites.append((base + v * k + w, 0, v * k + w))
    return BindingTable(names, weight_sites=weight_sites, theta_sites=theta_sites)


def build_local_block(graph: WsnGraph, large: float = LARGE_DEFAULT) -> NetworkSpec:
    """One propagation step as a network: hard forward on an encoded state
    equals encoding the simulator's step."""
    plan = build_block_plan(graph, large)
    return NetworkSpec(plan.layers(), repeat=1, bindings=_bindings(graph))


def build_global_network(graph: WsnGraph, large: float = LARGE_DEFAULT) -> NetworkSpec:
    """The local block repeated node_count times with shared parameters;
    hard forward computes the full propagation function."""
    plan = build_block_plan(graph, large)
    return NetworkSpec(plan.layers(), repeat=graph.node_count,
                       bindings=_bindings(graph))


def network_final_state(net: NetworkSpec, labels, worm_count: int,
                        early_exit: bool = True):
    """Hard forward of an encoded state, decoded back to labels."""
    out, _ = forward(net, encode_flat(labels, worm_count), mode=HARD,
                     early_exit=early_exit, keep_trace=False)
    return decode_flat(out, worm_count)


def _lenient_labels(flat: np.ndarray, worm_count: int) -> list:
    """Best-effort labels from a possibly malformed output, for reports."""
    scores = flat.reshape(-1, worm_count).real
    best = scores.argmax(axis=1)
    return [int(b + 1) if scores[i, b] > 0.5 else 0 for i, b in enumerate(best)]


@dataclass(frozen=True)
class EquivalenceReport:
    trials: int
    mismatches: int
    first_counterexample: dict | None
    records: tuple

    @property
    def ok(self) -> bool:
        return self.mismatches == 0


def verify_equivalence(graph: WsnGraph, trials: int = 100, rng_seed=None,
                       network: NetworkSpec | None = None,
                       exhaustive: bool = False, cap: int = 10 ** 6,
                       large: float = LARGE_DEFAULT) -> EquivalenceReport:
    """Compare the compiled global network's hard forward against the
    simulator on random initial states (or on every possible state in
    exhaustive mode).  Any mismatch is reported with a per-step diff."""
    if not exhaustive and trials < 1:
        raise ValueError("trials must be >= 1")
    net = network if network is not None else build_global_network(graph, large)
    k = graph.worm_count
    if exhaustive:
        total = (k + 1) ** graph.node_count
        if total > cap:
            raise ValueError(f"exhaustive mode would enumerate {total} > cap {cap} states")
        initials = itertools.product(range(k + 1), repeat=graph.node_count)
        n_trials = total
    else:
        rng = as_rng(rng_seed)
        initials = (rng.integers(0, k + 1, size=graph.node_count)
                    for _ in range(trials))
        n_trials = trials
    mismatches = 0
    first = None
    records = []
    for labels in initials:
        labels = np.asarray(labels, dtype=np.int64)
        sim_final, sim_trace = propagate(graph, labels)
        out, _ = forward(net, encode_flat(labels, k), mode=HARD,
                         early_exit=True, keep_trace=False)
        try:
            net_final = decode_flat(out, k).labels
            malformed = False
        except Exception:
            net_final = np.array(_lenient_labels(out, k), dtype=np.int64)
            malformed = True
        if malformed or not np.array_equal(net_final, sim_final.labels):
            mismatches += 1
            record = {
                "initial": labels.tolist(),
                "simulator_final": sim_final.labels.tolist(),
                "network_final": np.asarray(net_final).tolist(),
                "network_output_malformed": malformed,
                "trace_diff": _trace_diff(net, graph, labels, sim_trace),
            }
            records.append(record)
            if first is None:
                first = record
    return EquivalenceReport(trials=n_trials, mismatches=mismatches,
                             first_counterexample=first, records=tuple(records))


def _trace_diff(net: NetworkSpec, graph: WsnGraph, labels, sim_trace) -> list:
    """Per-step labels from both routes (network states decoded leniently
    at every block boundary)."""
    k = graph.worm_count
    n_layers = len(net.layers)
    _, trace = forward(net, encode_flat(labels, k), mode=HARD)
    diff = []
    for block in range(net.repeat):
        boundary = trace.post(block * n_layers + n_layers - 1)[:, 0]
        net_labels = _lenient_labels(boundary, k)
        sim_labels = (sim_trace.states[min(block + 1, sim_trace.converged_at)]
                      .labels.tolist())
        diff.append({"step": block + 1, "network": net_labels, "simulator": sim_labels})
        if net_labels == sim_labels and block + 1 >= sim_trace.converged_at:
            break
    return diff
