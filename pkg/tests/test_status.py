import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wormprop.exceptions import DimensionError, InvalidLabelError, MalformedStatusError
from wormprop.status import (
    InfectionState,
    decode_flat,
    decode_status,
    encode_flat,
    encode_status,
    flatten_status,
    node_loss,
    unflatten_status,
)


def test_all_innocent_encodes_to_zero_matrix():
    m = encode_status([0, 0, 0], 2)
    assert m.shape == (2, 3)
    assert np.all(m == 0)


def test_one_hot_columns():
    m = encode_status([1, 2, 0], 2)
    expected = np.array([[1, 0, 0], [0, 1, 0]], dtype=np.complex128)
    assert np.array_equal(m, expected)


def test_label_out_of_range_rejected():
    with pytest.raises(InvalidLabelError):
        encode_status([0, 3], 2)
    with pytest.raises(InvalidLabelError):
        encode_status([-1, 0], 2)


def test_roundtrip_random_states():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        k = int(rng.integers(1, 9))
        n = int(rng.integers(1, 30))
        labels = rng.integers(0, k + 1, size=n)
        state = decode_status(encode_status(labels, k))
        assert np.array_equal(state.labels, labels)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.data())
def test_decode_encode_identity_on_valid_matrices(k, data):
    n = data.draw(st.integers(1, 12))
    labels = np.array(data.draw(
        st.lists(st.integers(0, k), min_size=n, max_size=n)))
    m = encode_status(labels, k)
    again = encode_status(decode_status(m), k)
    assert np.array_equal(m, again)


def test_decode_all_zero():
    st_ = decode_status(np.zeros((3, 4), dtype=np.complex128))
    assert np.array_equal(st_.labels, [0, 0, 0, 0])


def test_decode_one_hot_row2():
    m = np.zeros((3, 1), dtype=np.complex128)
    m[1, 0] = 1.0
    assert decode_status(m).labels[0] == 2


def test_decode_rejects_split_mass():
    m = np.array([[0.5], [0.5]], dtype=np.complex128)
    with pytest.raises(MalformedStatusError):
        decode_status(m)


def test_decode_rejects_double_one_hot():
    m = np.array([[1.0], [1.0]], dtype=np.complex128)
    with pytest.raises(MalformedStatusError):
        decode_status(m)


def test_decode_rejects_imaginary_mass():
    m = np.array([[1.0 + 0.5j], [0.0]], dtype=np.complex128)
    with pytest.raises(MalformedStatusError):
        decode_status(m)


def test_flatten_unflatten():
    labels = np.array([2, 0, 1])
    m = encode_status(labels, 2)
    flat = flatten_status(m)
    # slot v*K + (k-1)
    assert flat[0 * 2 + 1] == 1.0 and flat[2 * 2 + 0] == 1.0
    assert np.array_equal(unflatten_status(flat, 2), m)
    assert np.array_equal(decode_flat(encode_flat(labels, 2), 2).labels, labels)


def test_node_loss_basics():
    assert node_loss([1, 2, 0], [1, 2, 0]) == 0.0
    assert node_loss([1, 2, 0], [1, 0, 0]) == pytest.approx(1 / 3)
    assert node_loss([1, 0, 1, 0], [0, 1, 0, 1]) == 1.0


def test_node_loss_dimension_error():
    with pytest.raises(DimensionError):
        node_loss([1, 2], [1, 2, 0])


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_node_loss_pseudometric(data):
    n = data.draw(st.integers(1, 15))
    a = np.array(data.draw(st.lists(st.integers(0, 3), min_size=n, max_size=n)))
    b = np.array(data.draw(st.lists(st.integers(0, 3), min_size=n, max_size=n)))
    lab = node_loss(a, b)
    assert lab == node_loss(b, a)
    assert 0.0 <= lab <= 1.0
    assert (lab == 0.0) == bool(np.array_equal(a, b))


def test_infection_state_immutable():
    state = InfectionState(np.array([1, 0]))
    with pytest.raises(ValueError):
        state.labels[0] = 2
