"""Instance generation: random graphs, sensor-lab topologies, model
parameters, and pools of (initial, final) snapshot pairs."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import GraphFormatError, SizeCapError
from .graph import WsnGraph, topology_graph
from .learning import ModelParams
from .simulate import propagate
from .status import InfectionState
from .validation import as_rng, check_label_matrix

POOL_FORMAT = "wsn-pool"
POOL_VERSION = 1


def gen_er_graph(n: int, p: float, rng, worm_count: int = 1) -> WsnGraph:
    """Directed Erdos-Renyi topology: each ordered pair (u, v), u != v, is
    an edge independently with probability p.  Thresholds and weights are
    zero placeholders until parameters are attached."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    rng = as_rng(rng)
    mask = rng.random((n, n)) < p
    np.fill_diagonal(mask, False)
    src, dst = np.nonzero(mask)
    return topology_graph(n, zip(src.tolist(), dst.tolist()), worm_count)


def load_sensor_graph(path, rule: str = "edge-list", radius: float | None = None,
                      worm_count: int = 1) -> WsnGraph:
    """Load a sensor deployment file.

    The file holds `node ID X Y` records and/or `edge U V` records.  With
    rule="edge-list" the edge records are used directly; with
    rule="distance" every pair of sensors within `radius` of each other is
    connected in both directions.  A disconnected result only warns.
    """
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not raw:
        raise GraphFormatError(f"{path}: empty sensor file")
    coords = {}
    edge_records = []
    for ln in raw:
        parts = ln.split()
        try:
            if parts[0] == "node":
                coords[int(parts[1])] = (float(parts[2]), float(parts[3]))
            elif parts[0] == "edge":
                edge_records.append((int(parts[1]), int(parts[2])))
            else:
                raise ValueError(f"unknown record {parts[0]!r}")
        except (IndexError, ValueError) as exc:
            raise GraphFormatError(f"{path}: bad record {ln!r}") from exc
    if rule == "edge-list":
        if not edge_records:
            raise GraphFormatError(f"{path}: no edge records for edge-list rule")
        n = max(max(u, v) for u, v in edge_records) + 1
        if coords:
            n = max(n, max(coords) + 1)
        edges = sorted(set(edge_records))
    elif rule == "distance":
        if radius is None or radius <= 0:
            raise ValueError("distance rule needs a positive radius")
        if not coords:
            raise GraphFormatError(f"{path}: no node records for distance rule")
        ids = sorted(coords)
        if ids != list(range(len(ids))):
            raise GraphFormatError(f"{path}: node ids must be 0..N-1")
        n = len(ids)
        pts = np.array([coords[i] for i in ids])
        d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        close = d2 <= radius * radius
        np.fill_diagonal(close, False)
        src, dst = np.nonzero(close)
        edges = list(zip(src.tolist(), dst.tolist()))
    else:
        raise ValueError(f"unknown rule {rule!r}")
    if _n_components(n, edges) > 1:
        warnings.warn(f"{path}: sensor graph is disconnected", stacklevel=2)
    return topology_graph(n, edges, worm_count)


def _n_components(n: int, edges) -> int:
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for u, v in edges:
        ra, rb = find(u), find(v)
        if ra != rb:
            parent[ra] = rb
    return len({find(v) for v in range(n)})


def sample_model_params(graph: WsnGraph, worm_count: int, rng) -> ModelParams:
    """Thresholds drawn i.i.d. from U[0,1]; the weight of edge (u, v) for
    worm k is the deterministic 1/(in_degree(v) + k)."""
    rng = as_rng(rng)
    k = int(worm_count)
    thresholds = rng.uniform(0.0, 1.0, size=(graph.node_count, k))
    indeg = np.array([graph.in_degree(int(v)) for v in graph.edge_dst])
    worms = np.arange(1, k + 1)
    weights = (1.0 / (indeg[:, None] + worms[None, :])).reshape(graph.edge_count, k)
    return ModelParams(weights, thresholds)


@dataclass(frozen=True)
class SamplePool:
    """Ordered (initial, final) snapshot pairs generated on one graph."""

    graph_id: str
    worm_count: int
    num_seeds: int
    master_seed: int
    initial: np.ndarray
    final: np.ndarray

    def __post_init__(self):
        initial = np.asarray(self.initial, dtype=np.int64)
        final = np.asarray(self.final, dtype=np.int64)
        if initial.shape != final.shape or initial.ndim != 2:
            raise ValueError("initial and final must be matching (Q, N) matrices")
        for arr in (initial, final):
            arr.flags.writeable = False
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "final", final)

    def __len__(self) -> int:
        return int(self.initial.shape[0])

    @property
    def node_count(self) -> int:
        return int(self.initial.shape[1])

    def pair(self, i: int) -> tuple[InfectionState, InfectionState]:
        return InfectionState(self.initial[i]), InfectionState(self.final[i])


def gen_sample_pool(graph: WsnGraph, params: ModelParams, count: int,
                    num_seeds: int, rng, graph_id: str = "") -> SamplePool:
    """For each pair: pick `num_seeds` distinct seed nodes uniformly, give
    each a uniform worm, and run the simulator for the final state.  The
    per-pair randomness is split deterministically from the master seed."""
    n = graph.node_count
    if not 1 <= num_seeds <= n:
        raise ValueError(f"num_seeds must lie in [1, {n}]")
    if count < 1:
        raise ValueError("count must be >= 1")
    master_seed = int(rng) if isinstance(rng, (int, np.integer)) else -1
    master = as_rng(rng)
    bound = params.apply_to(graph)
    k = bound.worm_count
    initial = np.zeros((count, n), dtype=np.int64)
    final = np.zeros((count, n), dtype=np.int64)
    for i, child in enumerate(master.spawn(count)):
        seeds = child.choice(n, size=num_seeds, replace=False)
        labels = np.zeros(n, dtype=np.int64)
        labels[seeds] = child.integers(1, k + 1, size=num_seeds)
        result, _ = propagate(bound, labels)
        initial[i] = labels
        final[i] = result.labels
    return SamplePool(graph_id=graph_id, worm_count=k, num_seeds=num_seeds,
                      master_seed=master_seed, initial=initial, final=final)


def audit_pool(graph: WsnGraph, params: ModelParams, pool: SamplePool) -> int:
    """Number of stored finals that disagree with a fresh simulation."""
    bound = params.apply_to(graph)
    bad = 0
    for i in range(len(pool)):
        result, _ = propagate(bound, pool.initial[i])
        if not np.array_equal(result.labels, pool.final[i]):
            bad += 1
    return bad


def split_pool(pool: SamplePool, train_size: int, test_size: int,
               rng) -> tuple[SamplePool, SamplePool]:
    """Disjoint uniform train/test subsets."""
    q = len(pool)
    if train_size < 0 or test_size < 0 or train_size + test_size > q:
        raise SizeCapError(
            f"cannot draw {train_size}+{test_size} samples from a pool of {q}"
        )
    rng = as_rng(rng)
    order = rng.permutation(q)
    tr, te = order[:train_size], order[train_size:train_size + test_size]

    def subset(idx):
        return SamplePool(graph_id=pool.graph_id, worm_count=pool.worm_count,
                          num_seeds=pool.num_seeds, master_seed=pool.master_seed,
                          initial=pool.initial[idx], final=pool.final[idx])

    return subset(tr), subset(te)


def save_pool(pool: SamplePool, path) -> None:
    lines = [f"{POOL_FORMAT} {POOL_VERSION}",
             f"graph {pool.graph_id or '-'}",
             f"K {pool.worm_count}",
             f"Q {len(pool)}",
             f"seeds {pool.num_seeds}",
             f"master_seed {pool.master_seed}"]
    for i in range(len(pool)):
        lines.append("pair %s | %s" % (
            " ".join(str(int(x)) for x in pool.initial[i]),
            " ".join(str(int(x)) for x in pool.final[i]),
        ))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_pool(path) -> SamplePool:
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw:
        raise GraphFormatError(f"{path}: empty pool file")
    head = raw[0].split()
    if len(head) != 2 or head[0] != POOL_FORMAT or head[1] != str(POOL_VERSION):
        raise GraphFormatError(f"{path}: not a {POOL_FORMAT} v{POOL_VERSION} file")
    try:
        graph_id = raw[1].split()[1]
        k = int(raw[2].split()[1])
        q = int(raw[3].split()[1])
        seeds = int(raw[4].split()[1])
        master_seed = int(raw[5].split()[1])
        initial, final = [], []
        for ln in raw[6:]:
            left, right = ln.removeprefix("pair ").split("|")
            initial.append([int(x) for x in left.split()])
            final.append([int(x) for x in right.split()])
    except (IndexError, ValueError) as exc:
        raise GraphFormatError(f"{path}: malformed pool file") from exc
    if len(initial) != q:
        raise GraphFormatError(f"{path}: expected {q} pairs, found {len(initial)}")
    initial = np.array(initial, dtype=np.int64)
    final = np.array(final, dtype=np.int64)
    n = initial.shape[1]
    check_label_matrix(initial, n, k)
    check_label_matrix(final, n, k)
    return SamplePool(graph_id="" if graph_id == "-" else graph_id, worm_count=k,
                      num_seeds=seeds, master_seed=master_seed,
                      initial=initial, final=final)
