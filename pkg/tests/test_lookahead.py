"""Tuple codec and the sliding-window source chain."""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from rtcode import (
    CapacityError,
    SpecValidationError,
    TupleCodec,
    bernoulli_source,
    build_markov_kernel,
    hamming,
    modified_distortion,
)


def test_kernel_depth_zero_is_iid():
    kernel = build_markov_kernel(bernoulli_source(0.3), 0)
    np.testing.assert_allclose(kernel.matrix, [[0.7, 0.3], [0.7, 0.3]])


def test_kernel_depth_one_shifts_window():
    kernel = build_markov_kernel(bernoulli_source(0.3), 1)
    codec = kernel.codec
    # from (0,1) the window can only move to (1, new symbol)
    row = kernel.matrix[codec.encode((0, 1))]
    assert row[codec.encode((1, 0))] == pytest.approx(0.7)
    assert row[codec.encode((1, 1))] == pytest.approx(0.3)
    assert row[codec.encode((0, 0))] == 0.0
    assert row[codec.encode((0, 1))] == 0.0


@given(st.floats(0.05, 0.95), st.integers(0, 2))
def test_product_measure_is_stationary(p, d):
    kernel = build_markov_kernel(bernoulli_source(p), d)
    comps = kernel.codec.components_table()
    pi = np.prod(np.asarray(kernel.source.p)[comps], axis=1)
    np.testing.assert_allclose(pi @ kernel.matrix, pi, atol=1e-12)
    assert pi.sum() == pytest.approx(1.0)


@given(st.integers(2, 4), st.integers(1, 4), st.data())
def test_codec_bijection(base, width, data):
    codec = TupleCodec(base, width)
    idx = data.draw(st.integers(0, codec.size - 1))
    assert codec.encode(codec.decode(idx)) == idx
    tup = tuple(data.draw(st.integers(0, base - 1)) for _ in range(width))
    assert codec.decode(codec.encode(tup)) == tup


def test_codec_first_symbol_most_significant():
    codec = TupleCodec(2, 3)
    assert codec.encode((1, 0, 0)) == 4
    assert codec.decode(3) == (0, 1, 1)


def test_codec_shift_drops_oldest_symbol():
    codec = TupleCodec(2, 2)
    assert codec.shift(codec.encode((0, 1)), 0) == codec.encode((1, 0))
    assert codec.shift(codec.encode((1, 1)), 1) == codec.encode((1, 1))


def test_codec_component_is_one_based():
    codec = TupleCodec(3, 2)
    idx = codec.encode((2, 1))
    assert codec.component(idx, 1) == 2
    assert codec.component(idx, 2) == 1
    with pytest.raises(ValueError):
        codec.component(idx, 0)


def test_codec_tables_match_scalar_ops():
    codec = TupleCodec(2, 3)
    comps = codec.components_table()
    shifts = codec.shift_table()
    for v in range(codec.size):
        assert tuple(comps[v]) == codec.decode(v)
        for u in range(2):
            assert shifts[v, u] == codec.shift(v, u)


def test_modified_distortion_charges_requested_slot():
    codec = TupleCodec(2, 2)
    loss = modified_distortion(hamming(2), codec, slot=1)
    # tuple (0,1) charged on its first symbol: loss of reconstructing r
    v = codec.encode((0, 1))
    np.testing.assert_allclose(loss[v], [0.0, 1.0])
    loss2 = modified_distortion(hamming(2), codec, slot=2)
    np.testing.assert_allclose(loss2[v], [1.0, 0.0])
    with pytest.raises(SpecValidationError):
        modified_distortion(hamming(2), codec, slot=3)


def test_kernel_rejects_negative_lookahead():
    with pytest.raises(SpecValidationError):
        build_markov_kernel(bernoulli_source(0.3), -1)


def test_kernel_capacity_guard():
    with pytest.raises(CapacityError) as err:
        build_markov_kernel(bernoulli_source(0.3), 4, max_states=8)
    assert err.value.count == 32
    assert err.value.limit == 8
