import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from votelearn.elections import PreferenceProfile, make_rng
from votelearn.encoding import (EncodingConfig, decode_rows, decode_winner, encode_profile, encode_rank_orders,
                                masked_softmax, pad_voter_dimension)
from votelearn.errors import CapacityError, InvalidParameterError


def test_one_hot_rows():
    cfg = EncodingConfig(m_max=2)
    assert encode_rank_orders(np.array([[1, 0]]), cfg).tolist() == [[0, 1, 1, 0]]
    cfg3 = EncodingConfig(m_max=3)
    assert encode_rank_orders(np.array([[1, 0]]), cfg3).tolist() == [[0, 1, 0, 1, 0, 0, 0, 0, 0]]


def test_integer_rows():
    cfg = EncodingConfig(m_max=3, scheme="integer")
    assert encode_rank_orders(np.array([[2, 0, 1]]), cfg).tolist() == [[2, 0, 1]]


def test_too_many_candidates():
    with pytest.raises(CapacityError):
        encode_rank_orders(np.array([[0, 1, 2]]), EncodingConfig(m_max=2))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(2, 5), st.integers(0, 2**32 - 1), st.sampled_from(["one_hot", "integer"]))
def test_decode_inverts_encode(n, m, seed, scheme):
    cfg = EncodingConfig(m_max=5, scheme=scheme)
    r = np.argsort(make_rng(seed).random((n, m)), axis=1)
    assert np.array_equal(decode_rows(encode_rank_orders(r, cfg), m, cfg), r)


def test_voter_padding():
    cfg = EncodingConfig(m_max=3, n_max=5)
    enc = encode_profile(PreferenceProfile(np.array([[0, 1, 2], [2, 1, 0], [1, 0, 2]])), cfg)
    padded = pad_voter_dimension(enc, cfg)
    assert padded.rows.shape == (5, 9)
    assert padded.voter_mask.tolist() == [True, True, True, False, False]
    assert np.all(padded.rows[3:] == 0)
    full = encode_profile(PreferenceProfile(np.tile([0, 1, 2], (5, 1))), cfg)
    assert np.array_equal(pad_voter_dimension(full, cfg).rows, full.rows)
    with pytest.raises(CapacityError):
        pad_voter_dimension(encode_profile(PreferenceProfile(np.tile([0, 1, 2], (6, 1))), cfg), cfg)


def test_decode_winner_examples():
    p, w = decode_winner(np.array([2.0, 0.0, -1.0]), np.array([True, True, True]))
    assert np.allclose(p, [0.8438, 0.1142, 0.0420], atol=1e-4) and w == 0
    p, w = decode_winner(np.zeros(4), np.ones(4, bool))
    assert np.allclose(p, 0.25) and w == 0
    p, w = decode_winner(np.array([0.0, 0.0, 99.0]), np.array([True, True, False]))
    assert np.allclose(p, [0.5, 0.5]) and w == 0


def test_masked_softmax_zero_on_masked():
    p = masked_softmax(np.array([[1.0, 2.0, 3.0]]), np.array([[True, False, True]]))
    assert p[0, 1] == 0.0 and abs(p.sum() - 1) < 1e-12
    with pytest.raises(InvalidParameterError):
        masked_softmax(np.zeros(3), np.zeros(3, bool))


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        EncodingConfig(scheme="binary")
    with pytest.raises(InvalidParameterError):
        EncodingConfig(m_max=4, n_c=3)
