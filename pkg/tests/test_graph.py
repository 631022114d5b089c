import numpy as np
import pytest

from wormprop.exceptions import GraphFormatError
from wormprop.graph import (
    WsnGraph,
    load_graph,
    load_state,
    save_graph,
    save_state,
    topology_graph,
)


def test_basic_construction(g3):
    assert g3.node_count == 3
    assert g3.worm_count == 2
    assert g3.edge_count == 2
    assert list(g3.in_neighbors[2]) == [0, 1]
    assert g3.in_degree(2) == 2 and g3.in_degree(0) == 0
    assert np.array_equal(g3.in_weights(2), [[0.6, 0.5], [0.4, 0.7]])


def test_edges_canonicalized_by_target_then_source():
    g = WsnGraph.from_edges(
        3, 1, np.zeros((3, 1)),
        [(2, 0, [0.3]), (1, 0, [0.1]), (0, 1, [0.2])],
    )
    assert list(g.edge_dst) == [0, 0, 1]
    assert list(g.edge_src) == [1, 2, 0]
    assert list(g.edge_weights[:, 0]) == [0.1, 0.3, 0.2]


def test_self_loop_rejected():
    with pytest.raises(ValueError, match="self-loop"):
        WsnGraph.from_edges(2, 1, np.zeros((2, 1)), [(0, 0, [1.0])])


def test_duplicate_edge_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        WsnGraph.from_edges(2, 1, np.zeros((2, 1)),
                            [(0, 1, [1.0]), (0, 1, [2.0])])


def test_negative_weight_rejected():
    with pytest.raises(ValueError, match="non-negative"):
        WsnGraph.from_edges(2, 1, np.zeros((2, 1)), [(0, 1, [-0.5])])


def test_threshold_shape_checked():
    with pytest.raises(Exception):
        WsnGraph.from_edges(2, 2, np.zeros((2, 1)), [])


def test_with_params_changes_worm_count():
    topo = topology_graph(3, [(0, 1), (1, 2)])
    assert topo.worm_count == 1
    g = topo.with_params(np.full((3, 4), 0.5), np.full((2, 4), 0.25), worm_count=4)
    assert g.worm_count == 4
    assert g.edge_count == 2
    assert np.all(g.thresholds == 0.5)


def test_max_in_weight_sum(g3):
    assert g3.max_in_weight_sum() == pytest.approx(1.2)  # worm 2 into node 2


def test_graph_file_roundtrip(tmp_path, g3):
    path = tmp_path / "g.txt"
    save_graph(g3, path)
    loaded = load_graph(path)
    assert loaded.node_count == g3.node_count
    assert loaded.worm_count == g3.worm_count
    assert np.array_equal(loaded.thresholds, g3.thresholds)
    assert np.array_equal(loaded.edge_src, g3.edge_src)
    assert np.array_equal(loaded.edge_weights, g3.edge_weights)


def test_graph_file_roundtrip_exact_floats(tmp_path):
    rng = np.random.default_rng(1)
    g = WsnGraph.from_edges(
        4, 2, rng.uniform(0, 1, (4, 2)),
        [(0, 1, rng.uniform(0, 1, 2)), (2, 3, rng.uniform(0, 1, 2))],
    )
    path = tmp_path / "g.txt"
    save_graph(g, path)
    loaded = load_graph(path)
    assert np.array_equal(loaded.thresholds, g.thresholds)
    assert np.array_equal(loaded.edge_weights, g.edge_weights)


def test_unknown_version_rejected(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("wsn-graph 99\nN 1\nK 1\nnode 0 0.5\n")
    with pytest.raises(GraphFormatError, match="version"):
        load_graph(path)


def test_not_a_graph_file(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("something else\n")
    with pytest.raises(GraphFormatError):
        load_graph(path)


def test_state_file_roundtrip(tmp_path):
    path = tmp_path / "s.txt"
    save_state([1, 0, 2], 2, path)
    labels, k = load_state(path)
    assert k == 2
    assert np.array_equal(labels, [1, 0, 2])


def test_graph_arrays_immutable(g3):
    with pytest.raises(ValueError):
        g3.thresholds[0, 0] = 5.0
    with pytest.raises(ValueError):
        g3.edge_weights[0, 0] = 5.0
