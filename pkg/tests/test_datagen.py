import importlib.resources

import numpy as np
import pytest

from wormprop.datagen import (
    audit_pool,
    gen_er_graph,
    gen_sample_pool,
    load_pool,
    load_sensor_graph,
    sample_model_params,
    save_pool,
    split_pool,
)
from wormprop.exceptions import GraphFormatError, SizeCapError
from wormprop.simulate import propagate


def bundled_sensor_file():
    return importlib.resources.files("wormprop.data") / "sensor_lab_54.txt"


def test_er_p0_has_no_edges():
    g = gen_er_graph(10, 0.0, 1)
    assert g.edge_count == 0


def test_er_p1_is_complete_digraph():
    g = gen_er_graph(4, 1.0, 1)
    assert g.edge_count == 12


def test_er_edge_count_concentration():
    g = gen_er_graph(200, 0.2, 42)
    mean = 200 * 199 * 0.2
    sigma = np.sqrt(200 * 199 * 0.2 * 0.8)
    assert abs(g.edge_count - mean) < 3 * sigma


def test_er_reproducible_under_seed():
    a = gen_er_graph(30, 0.3, 7)
    b = gen_er_graph(30, 0.3, 7)
    assert np.array_equal(a.edge_src, b.edge_src)
    assert np.array_equal(a.edge_dst, b.edge_dst)


def test_bundled_sensor_stand_in_loads():
    with importlib.resources.as_file(bundled_sensor_file()) as path:
        g = load_sensor_graph(path, rule="distance", radius=7.0)
    assert g.node_count == 54
    assert g.edge_count > 0


def test_distance_rule_collinear_points(tmp_path):
    path = tmp_path / "s.txt"
    path.write_text("node 0 0 0\nnode 1 1 0\nnode 2 2 0\n")
    g = load_sensor_graph(path, rule="distance", radius=1.5)
    assert g.edge_count == 4  # both directions between adjacent pairs only


def test_edge_list_rule(tmp_path):
    path = tmp_path / "s.txt"
    path.write_text("edge 0 1\nedge 1 2\nedge 2 0\n")
    g = load_sensor_graph(path, rule="edge-list")
    assert g.node_count == 3
    assert g.edge_count == 3


def test_empty_sensor_file_rejected(tmp_path):
    path = tmp_path / "s.txt"
    path.write_text("")
    with pytest.raises(GraphFormatError):
        load_sensor_graph(path, rule="edge-list")


def test_disconnected_sensor_file_warns(tmp_path):
    path = tmp_path / "s.txt"
    path.write_text("node 0 0 0\nnode 1 1 0\nnode 2 50 50\n")
    with pytest.warns(UserWarning, match="disconnected"):
        load_sensor_graph(path, rule="distance", radius=1.5)


def test_sample_model_params_formula():
    g = gen_er_graph(8, 0.5, 3)
    params = sample_model_params(g, 4, 5)
    for i in range(g.edge_count):
        d = g.in_degree(int(g.edge_dst[i]))
        for k in range(4):
            assert params.edge_weights[i, k] == 1.0 / (d + k + 1)
    assert np.all((params.thresholds >= 0) & (params.thresholds <= 1))


def test_sample_model_params_weight_determinism():
    g = gen_er_graph(8, 0.5, 3)
    a = sample_model_params(g, 2, 1)
    b = sample_model_params(g, 2, 999)  # different rng: weights identical
    assert np.array_equal(a.edge_weights, b.edge_weights)
    assert not np.array_equal(a.thresholds, b.thresholds)


def test_pool_all_seeds_is_fixed_point():
    g = gen_er_graph(6, 0.4, 2)
    params = sample_model_params(g, 2, 2)
    pool = gen_sample_pool(g, params, 5, 6, 3)
    assert np.all(pool.initial > 0)
    assert np.array_equal(pool.initial, pool.final)


def test_pool_seed_count_invariant():
    g = gen_er_graph(12, 0.3, 4)
    params = sample_model_params(g, 4, 4)
    pool = gen_sample_pool(g, params, 25, 5, 9)
    assert np.all((pool.initial > 0).sum(axis=1) == 5)


def test_pool_paper_scale_setting():
    g = gen_er_graph(200, 0.2, 11)
    params = sample_model_params(g, 4, 11)
    pool = gen_sample_pool(g, params, 1000, 100, 12, graph_id="er200")
    assert len(pool) == 1000
    assert np.all((pool.initial > 0).sum(axis=1) == 100)
    bound = params.apply_to(g)
    for i in (0, 499, 999):  # spot-check self-consistency
        final, _ = propagate(bound, pool.initial[i])
        assert np.array_equal(final.labels, pool.final[i])


def test_pool_self_consistency_audit():
    g = gen_er_graph(10, 0.3, 5)
    params = sample_model_params(g, 2, 5)
    pool = gen_sample_pool(g, params, 30, 4, 6)
    assert audit_pool(g, params, pool) == 0


def test_pool_reproducible():
    g = gen_er_graph(10, 0.3, 5)
    params = sample_model_params(g, 2, 5)
    a = gen_sample_pool(g, params, 10, 4, 42)
    b = gen_sample_pool(g, params, 10, 4, 42)
    assert np.array_equal(a.initial, b.initial)
    assert np.array_equal(a.final, b.final)


def test_split_pool_partition():
    g = gen_er_graph(8, 0.4, 6)
    params = sample_model_params(g, 2, 6)
    pool = gen_sample_pool(g, params, 50, 4, 7)
    train, test = split_pool(pool, 30, 20, 8)
    assert len(train) == 30 and len(test) == 20
    rows = {tuple(r) for r in np.vstack([train.initial, test.initial])}
    assert rows <= {tuple(r) for r in pool.initial}


def test_split_pool_empty_train_allowed():
    g = gen_er_graph(8, 0.4, 6)
    params = sample_model_params(g, 2, 6)
    pool = gen_sample_pool(g, params, 10, 4, 7)
    train, test = split_pool(pool, 0, 10, 1)
    assert len(train) == 0 and len(test) == 10


def test_split_pool_same_seed_same_split():
    g = gen_er_graph(8, 0.4, 6)
    params = sample_model_params(g, 2, 6)
    pool = gen_sample_pool(g, params, 20, 4, 7)
    a1, b1 = split_pool(pool, 12, 8, 99)
    a2, b2 = split_pool(pool, 12, 8, 99)
    assert np.array_equal(a1.initial, a2.initial)
    assert np.array_equal(b1.final, b2.final)


def test_split_pool_size_error():
    g = gen_er_graph(8, 0.4, 6)
    params = sample_model_params(g, 2, 6)
    pool = gen_sample_pool(g, params, 10, 4, 7)
    with pytest.raises(SizeCapError):
        split_pool(pool, 8, 8, 1)


def test_pool_file_roundtrip(tmp_path):
    g = gen_er_graph(7, 0.4, 3)
    params = sample_model_params(g, 2, 3)
    pool = gen_sample_pool(g, params, 12, 3, 55, graph_id="toy")
    path = tmp_path / "pool.txt"
    save_pool(pool, path)
    loaded = load_pool(path)
    assert loaded.graph_id == "toy"
    assert loaded.worm_count == 2
    assert loaded.num_seeds == 3
    assert loaded.master_seed == 55
    assert np.array_equal(loaded.initial, pool.initial)
    assert np.array_equal(loaded.final, pool.final)


def test_pool_file_bad_version(tmp_path):
    path = tmp_path / "pool.txt"
    path.write_text("wsn-pool 9\n")
    with pytest.raises(GraphFormatError):
        load_pool(path)
