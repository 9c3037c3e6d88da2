import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from macdisp.channel import (Channel, ChannelFormatError, JointInput, RateVec, joint_type_project,
                             load_channel, load_input, serialize_channel)

from conftest import noiseless_product
from oracles import all_types


def _doc(w):
    w = np.asarray(w)
    return json.dumps({"x1_size": w.shape[0], "x2_size": w.shape[1], "y_size": w.shape[2], "w": w.tolist()})


BSC_MAC = [[[0.9, 0.1], [0.1, 0.9]], [[0.1, 0.9], [0.9, 0.1]]]


def test_load_well_formed_document():
    ch = load_channel(_doc(BSC_MAC).encode())
    assert (ch.x1_size, ch.x2_size, ch.y_size) == (2, 2, 2)
    assert np.array_equal(ch.w, np.array(BSC_MAC))


def test_load_from_stream():
    ch = load_channel(io.BytesIO(_doc(BSC_MAC).encode()))
    assert ch.y_size == 2


def test_row_sum_error_names_the_row():
    w = np.array(BSC_MAC)
    w[1, 0] = [0.11, 0.9]
    with pytest.raises(ChannelFormatError, match=r"x1=1, x2=0"):
        load_channel(_doc(w))


def test_file_tolerance_is_looser_than_analytic():
    w = np.array(BSC_MAC)
    w[0, 0] = [0.9 + 5e-10, 0.1]
    assert load_channel(_doc(w)).w[0, 0, 0] == 0.9 + 5e-10  # kept, not renormalized
    with pytest.raises(ChannelFormatError):
        Channel(w)


def test_negative_entry_rejected():
    w = np.array(BSC_MAC)
    w[0, 1] = [1.1, -0.1]
    with pytest.raises(ChannelFormatError, match="negative"):
        load_channel(_doc(w))


@pytest.mark.parametrize("doc", [
    "not json",
    "[]",
    json.dumps({"x1_size": 2, "x2_size": 2, "w": []}),
    json.dumps({"x1_size": 2, "x2_size": 2, "y_size": 2, "w": [[[1, 0]]]}),
    json.dumps({"x1_size": 0, "x2_size": 2, "y_size": 2, "w": []}),
    json.dumps({"x1_size": 1, "x2_size": 1, "y_size": 2, "w": [[[0.5, "a"]]]}),
])
def test_malformed_documents(doc):
    with pytest.raises(ChannelFormatError):
        load_channel(doc)


def test_noiseless_product_channel_is_valid():
    ch = load_channel(serialize_channel(noiseless_product()))
    assert ch.y_size == 4
    assert set(np.unique(ch.w)) == {0.0, 1.0}


def test_channel_is_immutable():
    ch = Channel(np.array(BSC_MAC))
    with pytest.raises(ValueError):
        ch.w[0, 0, 0] = 0.5


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_serialize_round_trip_is_bitwise(a1, a2, ny, seed):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(ny), size=(a1, a2))
    # make rows sum to one as closely as floats allow
    w[..., -1] = 1.0 - w[..., :-1].sum(axis=-1)
    w = np.clip(w, 0, 1)
    ch = Channel(w)
    back = load_channel(serialize_channel(ch))
    assert back == ch
    assert back.w.tobytes() == ch.w.tobytes()


def test_joint_input_validation():
    with pytest.raises(ValueError):
        JointInput(np.array([[0.5, 0.6]]))
    with pytest.raises(ValueError):
        JointInput(np.array([[0.3, 0.7]]), n=4)
    assert JointInput(np.array([[0.25, 0.75]]), n=4).counts.tolist() == [[1, 3]]


def test_load_input_document():
    p = load_input(json.dumps({"p": [[0.25, 0.25], [0.25, 0.25]], "n": 4}))
    assert p.n == 4 and p.counts.sum() == 4
    with pytest.raises(ChannelFormatError):
        load_input(json.dumps({"p": [[0.5, 0.6]]}))


def test_ratevec_transform():
    r = RateVec.from_pair(0.2, 0.3)
    assert r.r12 == pytest.approx(0.5)
    assert r.to_pair() == pytest.approx((0.2, 0.3))
    assert r.r12 >= r.r1


def test_project_uniform_n4():
    out = joint_type_project(JointInput.uniform(2, 2), 4)
    assert np.allclose(out.p, 0.25) and out.n == 4


def test_project_one_by_two():
    out = joint_type_project(np.array([[0.3, 0.7]]), 3)
    assert np.allclose(out.p, [[1 / 3, 2 / 3]])


@pytest.mark.parametrize("seed", range(5))
def test_project_matches_exhaustive_search(seed):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(4)).reshape(2, 2)
    out = joint_type_project(p, 50)
    best = min(np.max(np.abs(c / 50 - p)) for c in all_types((2, 2), 50))
    assert np.max(np.abs(out.p - p)) == pytest.approx(best, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 500), st.integers(0, 2**32 - 1))
def test_projection_is_close_and_idempotent(a1, a2, n, seed):
    p = np.random.default_rng(seed).dirichlet(np.ones(a1 * a2)).reshape(a1, a2)
    out = joint_type_project(p, n)
    assert out.n == n
    assert np.max(np.abs(out.p - p)) <= 1.0 / n + 1e-12
    assert joint_type_project(out, n) == out


def test_projection_rejects_bad_n():
    with pytest.raises(ValueError):
        joint_type_project(JointInput.uniform(2, 2), 0)
