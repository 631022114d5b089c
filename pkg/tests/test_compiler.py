import numpy as np
import pytest

from wormprop.compiler import (
    LARGE_DEFAULT,
    auto_large,
    build_block_plan,
    build_comparison_levels,
    build_format_adjustment,
    build_global_network,
    build_local_block,
    build_stage1_layer,
    network_final_state,
    verify_equivalence,
)
from wormprop.exceptions import ConfigurationError, StructureError
from wormprop.graph import WsnGraph
from wormprop.network import HARD, NetworkSpec, forward
from wormprop.simulate import exhaustive_oracle, propagate, step
from wormprop.status import decode_flat, encode_flat, encode_status

from conftest import random_graph


def test_stage1_entries_g3(g3):
    layer = build_stage1_layer(g3)
    w = layer.weight.toarray()
    # edge 0 -> 2, worm 1: row 2*2+0, col 0*2+0
    assert w[4, 0] == 0.6
    assert w[5, 1] == 0.5
    assert w[4, 2] == 0.4
    assert w[5, 3] == 0.7
    for i in range(6):
        assert w[i, i] == LARGE_DEFAULT
    # bias imaginary part carries the worm index
    assert np.array_equal(layer.bias.imag, [1, 2, 1, 2, 1, 2])
    assert [a.param for a in layer.activations[4:6]] == [0.5, 0.6]


def test_stage1_no_edges_only_self_links():
    g = WsnGraph.from_edges(3, 2, np.full((3, 2), 0.5), [])
    layer = build_stage1_layer(g)
    w = layer.weight.toarray()
    assert np.count_nonzero(w) == 6
    assert np.all(np.diag(w) == LARGE_DEFAULT)


def test_stage1_forward_real_parts_are_incoming_sums(g3, g3_state):
    layer = build_stage1_layer(g3)
    net = NetworkSpec([layer])
    out, _ = forward(net, encode_flat(g3_state, 2))
    # node 2 slots carry the incoming sums with the worm index imaginary
    assert out[4] == 0.6 + 1j
    assert out[5] == 0.7 + 2j


def test_stage1_dominance_check():
    g = WsnGraph.from_edges(2, 1, [[0.5], [0.5]], [(0, 1, [2000.0])])
    with pytest.raises(ConfigurationError):
        build_stage1_layer(g)
    build_stage1_layer(g, large=3000.0)  # explicit larger constant is fine


def _run_comparison(levels, node_count, values):
    """Run per-node comparison levels on crafted (K,) complex slot values."""
    net = NetworkSpec([l for pair in levels for l in pair])
    x = np.asarray(values, dtype=np.complex128).reshape(-1)
    out, _ = forward(net, x)
    return out


def test_comparison_picks_larger_real(g3):
    levels = build_comparison_levels(2, 1)
    out = _run_comparison(levels, 1, [0.6 + 1j, 0.7 + 2j])
    assert out[0] == 0.7 + 2j


def test_comparison_tie_prefers_larger_index():
    levels = build_comparison_levels(2, 1)
    out = _run_comparison(levels, 1, [0.6 + 1j, 0.6 + 2j])
    assert out[0] == 0.6 + 2j


def test_comparison_all_zero_stays_zero():
    levels = build_comparison_levels(4, 1)
    out = _run_comparison(levels, 1, [0, 0, 0, 0])
    assert out[0] == 0.0


def test_comparison_k4_semantics():
    levels = build_comparison_levels(4, 2)
    # two nodes: winner slot 3 (index 3) for node 0; blocked-all for node 1
    vals = [0.2 + 1j, 0.9 + 2j, 1.1 + 3j, 0.3 + 4j, 0, 0, 0, 0]
    out = _run_comparison(levels, 2, vals)
    assert out[0] == 1.1 + 3j
    assert out[1] == 0.0


def test_comparison_requires_power_of_two():
    with pytest.raises(StructureError):
        build_comparison_levels(3, 1)


def test_format_adjustment_one_hot():
    f1, f2 = build_format_adjustment(2, 1)
    net = NetworkSpec([f1, f2])
    out, _ = forward(net, np.array([0.7 + 2j]))
    assert np.array_equal(out, [0, 1.0])
    out, _ = forward(net, np.array([0.3 + 1j]))
    assert np.array_equal(out, [1.0, 0])
    out, _ = forward(net, np.array([0j]))
    assert np.array_equal(out, [0, 0])


def test_format_adjustment_k8_all_indices():
    f1, f2 = build_format_adjustment(8, 1)
    net = NetworkSpec([f1, f2])
    for idx in range(9):
        x = np.array([0.4 + idx * 1j]) if idx else np.array([0j])
        out, _ = forward(net, x)
        expected = np.zeros(8)
        if idx:
            expected[idx - 1] = 1.0
        assert np.array_equal(out.real, expected)
        assert np.all(out.imag == 0)


def test_block_layer_counts():
    for k, count in ((2, 6), (4, 8), (8, 10)):
        g = random_graph(np.random.default_rng(k), n=3, k=k, p=0.5)
        block = build_local_block(g)
        assert block.layer_count == count
        assert block.layer_count == 2 * int(np.log2(k)) + 4
        plan = build_block_plan(g)
        assert plan.layer_count == count


def test_block_step_equivalence_g3(g3, g3_state):
    block = build_local_block(g3)
    out, _ = forward(block, encode_flat(g3_state, 2))
    want = encode_status(step(g3, g3_state), 2)
    assert np.array_equal(out, encode_flat_matrix(want))


def encode_flat_matrix(matrix):
    return np.ascontiguousarray(matrix.T).reshape(-1)


def test_block_step_equivalence_random():
    rng = np.random.default_rng(21)
    for _ in range(30):
        g = random_graph(rng, k=int(rng.choice([1, 2, 4])))
        block = build_local_block(g)
        labels = rng.integers(0, g.worm_count + 1, size=g.node_count)
        out, _ = forward(block, encode_flat(labels, g.worm_count))
        want = encode_flat(step(g, labels), g.worm_count)
        assert np.array_equal(out, want)


def test_block_idempotent_at_fixed_points():
    rng = np.random.default_rng(31)
    for _ in range(15):
        g = random_graph(rng)
        labels = rng.integers(0, g.worm_count + 1, size=g.node_count)
        final, _ = propagate(g, labels)
        block = build_local_block(g)
        x = encode_flat(final, g.worm_count)
        out, _ = forward(block, x)
        assert np.array_equal(out, x)


def test_all_infected_fixed_point(g3):
    net = build_global_network(g3)
    x = encode_flat([1, 2, 2], 2)
    out, _ = forward(net, x)
    assert np.array_equal(out, x)


def test_global_network_matches_propagate(g3, g3_state):
    net = build_global_network(g3)
    assert net.layer_count == 3 * 6
    final = network_final_state(net, g3_state, 2)
    want, _ = propagate(g3, g3_state)
    assert final == want


def test_global_tie_instances(g3_tie, g3_state):
    final = network_final_state(build_global_network(g3_tie), g3_state, 2)
    assert np.array_equal(final.labels, [1, 2, 2])


def test_parameter_binding_consistency(g3):
    net = build_global_network(g3)
    values = net.parameter_values()
    # edge weights in canonical order, then thresholds
    assert values[0] == 0.6 and values[1] == 0.5  # edge 0->2
    assert values[2] == 0.4 and values[3] == 0.7  # edge 1->2
    assert values[4 + 2 * 2] == 0.5  # theta[2][1]
    bumped = values.copy()
    bumped[0] = 0.55
    net2 = net.with_parameters(bumped)
    w = net2.layers[0].weight.toarray()
    assert w[4, 0] == 0.55
    # nothing else moved
    w_old = net.layers[0].weight.toarray()
    w[4, 0] = 0.6
    assert np.array_equal(w, w_old)


def test_auto_large_dominates(g3):
    assert auto_large(g3) > g3.max_in_weight_sum() + g3.thresholds.max()
    rep = verify_equivalence(g3, trials=50, rng_seed=3,
                             network=build_global_network(g3, auto_large(g3)))
    assert rep.ok


def test_verify_equivalence_clean(g3):
    report = verify_equivalence(g3, trials=100, rng_seed=0)
    assert report.trials == 100
    assert report.mismatches == 0
    assert report.first_counterexample is None


def test_verify_equivalence_exhaustive_small():
    rng = np.random.default_rng(5)
    g = random_graph(rng, n=5, k=2, p=0.4)
    report = verify_equivalence(g, exhaustive=True)
    assert report.trials == 3 ** 5
    assert report.mismatches == 0
    table = exhaustive_oracle(g)
    assert len(table) == report.trials


def test_verify_equivalence_detects_corruption(g3):
    net = build_global_network(g3)
    values = net.parameter_values()
    values[0] += 0.5  # corrupt one edge weight in the network only
    corrupted = net.with_parameters(values)
    report = verify_equivalence(g3, trials=200, rng_seed=1, network=corrupted)
    assert report.mismatches >= 1
    ce = report.first_counterexample
    assert ce is not None
    assert ce["trace_diff"], "counterexample must include a per-step diff"
    assert len(report.records) == report.mismatches
