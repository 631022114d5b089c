"""Directed sensor graph with per-node, per-worm thresholds and edge weights.

Edges are kept in a canonical order sorted by (target, source).  The
per-target in-neighbor lists derived from it are therefore sorted by
ascending source id; every incoming-weight sum in this package (simulator
and compiled network alike) accumulates contributions in that order, which
is what makes the two routes agree float-for-float.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError, GraphFormatError
from .validation import check_finite_nonnegative, check_labels, check_worm_count

GRAPH_FORMAT = "wsn-graph"
STATE_FORMAT = "wsn-state"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class WsnGraph:
    """Immutable directed graph over ``node_count`` sensors and
    ``worm_count`` competing worms.

    thresholds:   (N, K) array, thresholds[v, k-1] is node v's threshold
                  against worm k.
    edge_src/dst: (M,) arrays in canonical (dst, src) order.
    edge_weights: (M, K) array aligned with edge_src/edge_dst.
    """

    node_count: int
    worm_count: int
    thresholds: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_weights: np.ndarray
    # derived, filled in __post_init__
    in_neighbors: tuple = field(init=False, repr=False, compare=False)
    _in_slices: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.node_count)
        k = check_worm_count(self.worm_count)
        if n < 1:
            raise ValueError(f"node_count must be >= 1, got {n}")
        thr = check_finite_nonnegative(self.thresholds, "thresholds")
        if thr.shape != (n, k):
            raise DimensionError(f"thresholds must have shape ({n}, {k}), got {thr.shape}")
        src = np.asarray(self.edge_src, dtype=np.int64)
        dst = np.asarray(self.edge_dst, dtype=np.int64)
        w = check_finite_nonnegative(self.edge_weights, "edge weights")
        m = src.size
        if dst.shape != (m,) or w.shape != (m, k):
            raise DimensionError("edge arrays have inconsistent shapes")
        if m:
            if src.min() < 0 or src.max() >= n or dst.min() < 0 or dst.max() >= n:
                raise ValueError("edge endpoint out of range")
            if np.any(src == dst):
                raise ValueError("self-loops are not allowed")
            order = np.lexsort((src, dst))
            src, dst, w = src[order], dst[order], w[order]
            keys = dst.astype(np.int64) * n + src
            if np.any(np.diff(keys) == 0):
                raise ValueError("duplicate edges are not allowed")
        for arr in (thr, src, dst, w):
            arr.flags.writeable = False
        object.__setattr__(self, "thresholds", thr)
        object.__setattr__(self, "edge_src", src)
        object.__setattr__(self, "edge_dst", dst)
        object.__setattr__(self, "edge_weights", w)
        # contiguous in-neighbor slices per target node
        starts = np.searchsorted(dst, np.arange(n))
        ends = np.searchsorted(dst, np.arange(n), side="right")
        object.__setattr__(self, "_in_slices", tuple(zip(starts.tolist(), ends.tolist())))
        object.__setattr__(
            self, "in_neighbors", tuple(src[a:b] for a, b in zip(starts, ends))
        )

    @classmethod
    def from_edges(cls, node_count, worm_count, thresholds, edges) -> "WsnGraph":
        """Build from an iterable of (src, dst, weights[K]) records."""
        edges = list(edges)
        k = check_worm_count(worm_count)
        src = np.array([e[0] for e in edges], dtype=np.int64)
        dst = np.array([e[1] for e in edges], dtype=np.int64)
        w = np.array([e[2] for e in edges], dtype=np.float64).reshape(len(edges), k)
        return cls(node_count, worm_count, np.asarray(thresholds, dtype=np.float64),
                   src, dst, w)

    @property
    def edge_count(self) -> int:
        return int(self.edge_src.size)

    def in_degree(self, v: int) -> int:
        a, b = self._in_slices[v]
        return b - a

    def in_weights(self, v: int) -> np.ndarray:
        """(in_degree, K) weight rows for node v, sorted by ascending source."""
        a, b = self._in_slices[v]
        return self.edge_weights[a:b]

    def in_edge_rows(self, v: int) -> slice:
        a, b = self._in_slices[v]
        return slice(a, b)

    def with_params(self, thresholds, edge_weights, worm_count: int | None = None) -> "WsnGraph":
        """Same topology with replaced thresholds and edge weights.

        The worm count may change as long as the supplied arrays agree; this
        is how a bare topology (worm_count=1, zero parameters) is completed.
        """
        thresholds = np.asarray(thresholds, dtype=np.float64)
        edge_weights = np.asarray(edge_weights, dtype=np.float64)
        k = int(worm_count) if worm_count is not None else (
            thresholds.shape[1] if thresholds.ndim == 2 else self.worm_count
        )
        return WsnGraph(self.node_count, k, thresholds,
                        self.edge_src.copy(), self.edge_dst.copy(), edge_weights)

    def max_in_weight_sum(self) -> float:
        """max over (node, worm) of the total incoming weight."""
        if not self.edge_count:
            return 0.0
        sums = np.zeros((self.node_count, self.worm_count))
        np.add.at(sums, self.edge_dst, self.edge_weights)
        return float(sums.max())


def topology_graph(node_count, edges, worm_count: int = 1) -> WsnGraph:
    """A WsnGraph carrying only structure (zero thresholds and weights)."""
    edges = [(u, v, np.zeros(worm_count)) for (u, v) in edges]
    return WsnGraph.from_edges(node_count, worm_count,
                               np.zeros((node_count, worm_count)), edges)


def _fmt(x: float) -> str:
    return repr(float(x))


def save_graph(graph: WsnGraph, path) -> None:
    lines = [f"{GRAPH_FORMAT} {FORMAT_VERSION}",
             f"N {graph.node_count}", f"K {graph.worm_count}"]
    for v in range(graph.node_count):
        lines.append("node %d %s" % (v, " ".join(_fmt(t) for t in graph.thresholds[v])))
    for i in range(graph.edge_count):
        lines.append("edge %d %d %s" % (graph.edge_src[i], graph.edge_dst[i],
                                        " ".join(_fmt(w) for w in graph.edge_weights[i])))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_graph(path) -> WsnGraph:
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw:
        raise GraphFormatError(f"{path}: empty graph file")
    head = raw[0].split()
    if len(head) != 2 or head[0] != GRAPH_FORMAT:
        raise GraphFormatError(f"{path}: not a {GRAPH_FORMAT} file")
    if head[1] != str(FORMAT_VERSION):
        raise GraphFormatError(f"{path}: unknown version {head[1]!r}")
    try:
        n = int(raw[1].split()[1])
        k = int(raw[2].split()[1])
    except (IndexError, ValueError) as exc:
        raise GraphFormatError(f"{path}: malformed header") from exc
    thresholds = np.zeros((n, k))
    seen = np.zeros(n, dtype=bool)
    edges = []
    for ln in raw[3:]:
        parts = ln.split()
        try:
            if parts[0] == "node":
                v = int(parts[1])
                vals = [float(x) for x in parts[2:]]
                if len(vals) != k:
                    raise ValueError("threshold count")
                thresholds[v] = vals
                seen[v] = True
            elif parts[0] == "edge":
                u, v = int(parts[1]), int(parts[2])
                w = [float(x) for x in parts[3:]]
                if len(w) != k:
                    raise ValueError("weight count")
                edges.append((u, v, w))
            else:
                raise ValueError(f"unknown record {parts[0]!r}")
        except (IndexError, ValueError) as exc:
            raise GraphFormatError(f"{path}: bad record {ln!r}") from exc
    if not seen.all():
        raise GraphFormatError(f"{path}: missing node records")
    return WsnGraph.from_edges(n, k, thresholds, edges)


def save_state(labels, worm_count: int, path) -> None:
    labels = check_labels(labels, worm_count=worm_count)
    lines = [f"{STATE_FORMAT} {FORMAT_VERSION}",
             f"N {labels.size}", f"K {worm_count}",
             "labels " + " ".join(str(int(x)) for x in labels)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_state(path) -> tuple[np.ndarray, int]:
    """Returns (labels, worm_count)."""
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw:
        raise GraphFormatError(f"{path}: empty state file")
    head = raw[0].split()
    if len(head) != 2 or head[0] != STATE_FORMAT or head[1] != str(FORMAT_VERSION):
        raise GraphFormatError(f"{path}: not a {STATE_FORMAT} v{FORMAT_VERSION} file")
    try:
        n = int(raw[1].split()[1])
        k = int(raw[2].split()[1])
        labels = np.array([int(x) for x in raw[3].split()[1:]], dtype=np.int64)
    except (IndexError, ValueError) as exc:
        raise GraphFormatError(f"{path}: malformed state file") from exc
    return check_labels(labels, n, k), k
