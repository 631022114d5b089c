"""Ground-truth simulator for the two-stage competitive propagation model.

Each step runs synchronously against the previous state.  Stage 1 collects,
for every innocent node, the worms whose incoming weight sum from infected
in-neighbors reaches the node's threshold; stage 2 infects the node with the
candidate of largest sum, breaking ties toward the larger worm index.
Infected nodes never change.

A worm is a candidate only if at least one in-neighbor actually carries it:
a zero threshold together with an empty incoming sum does not create an
infection out of nothing.  (With thresholds of exactly zero AND all-zero
incoming weights this restriction is the one corner where the compiled
network, which only sees the sums, can disagree; see compiler module notes.)

All incoming sums accumulate sequentially over in-neighbors in ascending
source order, matching the compiled network's accumulation order so that
threshold and argmax decisions agree float-for-float.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .exceptions import PreconditionError, SizeCapError
from .graph import WsnGraph
from .status import InfectionState, _labels_of
from .validation import check_labels


def _seq_sum(values: np.ndarray) -> float:
    """Strictly sequential left-to-right float sum."""
    if values.size == 0:
        return 0.0
    return float(np.add.accumulate(values)[-1])


@dataclass(frozen=True)
class PropagationTrace:
    """States at steps t = 0..converged_at; no label ever leaves nonzero."""

    states: tuple
    converged_at: int

    def __post_init__(self):
        if self.converged_at != len(self.states) - 1:
            raise ValueError("converged_at must index the last state")


def candidate_worms(graph: WsnGraph, state, v: int) -> set[int]:
    """Stage 1: worms that could infect innocent node v under `state`."""
    labels = check_labels(_labels_of(state), graph.node_count, graph.worm_count)
    if labels[v] != 0:
        raise PreconditionError(f"node {v} is already infected")
    sums = _candidate_sums(graph, labels, v)
    return set(sums.keys())


def resolve_infection(graph: WsnGraph, state, v: int, candidates) -> int:
    """Stage 2: the winning worm among `candidates`, larger index on ties."""
    labels = check_labels(_labels_of(state), graph.node_count, graph.worm_count)
    candidates = set(int(k) for k in candidates)
    if not candidates:
        raise PreconditionError("candidate set is empty")
    if any(k < 1 or k > graph.worm_count for k in candidates):
        raise PreconditionError(f"candidates must lie in [1, {graph.worm_count}]")
    sums = _candidate_sums(graph, labels, v, restrict=candidates)
    best_k, best_sum = 0, -np.inf
    for k in sorted(candidates):
        s = sums.get(k, 0.0)
        if s >= best_sum:
            best_k, best_sum = k, s
    return best_k


def _candidate_sums(graph: WsnGraph, labels: np.ndarray, v: int,
                    restrict=None) -> dict[int, float]:
    """Incoming weight sums per worm carried by at least one in-neighbor,
    keeping only worms whose sum reaches the threshold (unless restricted
    to an explicit candidate set)."""
    nbrs = graph.in_neighbors[v]
    if nbrs.size == 0:
        return {}
    nbr_labels = labels[nbrs]
    weights = graph.in_weights(v)
    out: dict[int, float] = {}
    for k in np.unique(nbr_labels):
        k = int(k)
        if k == 0:
            continue
        if restrict is not None and k not in restrict:
            continue
        total = _seq_sum(weights[nbr_labels == k, k - 1])
        if restrict is not None or total >= graph.thresholds[v, k - 1]:
            out[k] = total
    return out


def step(graph: WsnGraph, state) -> InfectionState:
    """One synchronous step; reads only the input state."""
    labels = check_labels(_labels_of(state), graph.node_count, graph.worm_count)
    new_labels = labels.copy()
    for v in np.nonzero(labels == 0)[0]:
        sums = _candidate_sums(graph, labels, int(v))
        if not sums:
            continue
        best_k, best_sum = 0, -np.inf
        for k in sorted(sums):
            if sums[k] >= best_sum:
                best_k, best_sum = k, sums[k]
        new_labels[v] = best_k
    return InfectionState(new_labels)


def propagate(graph: WsnGraph, initial) -> tuple[InfectionState, PropagationTrace]:
    """Run steps to the fixed point (reached within node_count steps)."""
    current = InfectionState(check_labels(_labels_of(initial),
                                          graph.node_count, graph.worm_count))
    states = [current]
    for _ in range(graph.node_count):
        nxt = step(graph, current)
        if nxt == current:
            break
        states.append(nxt)
        current = nxt
    trace = PropagationTrace(states=tuple(states), converged_at=len(states) - 1)
    return current, trace


def exhaustive_oracle(graph: WsnGraph, cap: int = 10 ** 6) -> dict:
    """Final state for every possible initial state, as a dict mapping
    label tuples to label tuples.  Refuses instances above `cap`."""
    total = (graph.worm_count + 1) ** graph.node_count
    if total > cap:
        raise SizeCapError(
            f"(K+1)^N = {total} exceeds cap {cap}; raise cap explicitly if intended"
        )
    table = {}
    for labels in itertools.product(range(graph.worm_count + 1),
                                    repeat=graph.node_count):
        final, _ = propagate(graph, np.array(labels, dtype=np.int64))
        table[labels] = tuple(int(x) for x in final.labels)
    return table


def export_trace(trace: PropagationTrace, path) -> None:
    """One textual record per step: `t label_0 .. label_{N-1}`."""
    with open(path, "w") as fh:
        for t, st in enumerate(trace.states):
            fh.write("%d %s\n" % (t, " ".join(str(int(x)) for x in st.labels)))
