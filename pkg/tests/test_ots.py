import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clicktree.errors import LengthMismatch
from clicktree.gbdt import OtsEncoder, compute_ots


def test_first_element_gets_prior():
    out = compute_ots(["A", "B", "A"], [1, 0, 1], [0, 1, 2], alpha=0.1, prior=0.37)
    assert out[0] == pytest.approx(0.37)
    assert out[1] == pytest.approx(0.37)


def test_hand_computed_running_means():
    out = compute_ots(["A", "A", "A"], [1, 0, 1], [0, 1, 2], alpha=0.1, prior=0.5)
    assert abs(out[0] - 0.5) < 1e-12
    assert abs(out[1] - 1.05 / 1.1) < 1e-12
    assert abs(out[2] - 1.05 / 2.1) < 1e-12


def test_all_distinct_categories_encode_to_prior():
    out = compute_ots(list("ABCDE"), [1, 1, 0, 0, 1], np.arange(5), prior=0.42)
    assert np.allclose(out, 0.42)


def test_respects_permutation_order():
    # reversed order: the "first seen" element is the last row
    out = compute_ots(["A", "A"], [1, 0], [1, 0], alpha=0.1, prior=0.5)
    assert out[1] == pytest.approx(0.5)
    assert out[0] == pytest.approx(0.05 / 1.1)


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        compute_ots(["A"], [1, 0], [0, 1])


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_leakage_freedom_and_range(data):
    n = data.draw(st.integers(2, 40))
    column = data.draw(
        st.lists(st.sampled_from("ABC"), min_size=n, max_size=n)
    )
    targets = np.array(data.draw(
        st.lists(st.integers(0, 1), min_size=n, max_size=n)
    ))
    seed = data.draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    sigma = rng.permutation(n)
    k = data.draw(st.integers(0, n - 1))
    prior = float(targets.mean())

    out = compute_ots(column, targets, sigma, 0.1, prior)
    assert ((out >= 0) & (out <= 1)).all()

    flipped = targets.copy()
    flipped[sigma[k]] = 1 - flipped[sigma[k]]
    out_flipped = compute_ots(column, flipped, sigma, 0.1, prior)
    # positions at or before k in sigma order never see the flipped target
    for j in range(k + 1):
        assert out[sigma[j]] == out_flipped[sigma[j]]


def test_encoder_frozen_statistics_and_fallback():
    rng = np.random.default_rng(0)
    columns = {"c1": ["A", "B", "A", "B", "A"]}
    targets = np.array([1, 0, 1, 1, 0])
    enc = OtsEncoder.fit(columns, targets, n_permutations=3, rng=rng)
    assert enc.prior == pytest.approx(0.6)
    encoded = enc.encode_frozen({"c1": ["A", "B", "Z"]})[:, 0]
    assert encoded[0] == pytest.approx((2 + 0.1 * 0.6) / (3 + 0.1))
    assert encoded[1] == pytest.approx((1 + 0.1 * 0.6) / (2 + 0.1))
    assert encoded[2] == pytest.approx(0.6)


def test_encoder_training_encoding_varies_by_permutation():
    rng = np.random.default_rng(1)
    columns = {"c1": list("AABBABAB")}
    targets = np.array([1, 0, 1, 0, 1, 1, 0, 0])
    enc = OtsEncoder.fit(columns, targets, n_permutations=4, rng=rng)
    first = enc.encode_training(columns, targets, 0)
    second = enc.encode_training(columns, targets, 1)
    assert first.shape == (8, 1)
    assert not np.array_equal(first, second)


def test_encoder_table_roundtrip():
    rng = np.random.default_rng(2)
    columns = {"a": list("XYXYX"), "b": list("PPQQP")}
    targets = np.array([0, 1, 1, 0, 1])
    enc = OtsEncoder.fit(columns, targets, 2, rng)
    again = OtsEncoder.from_tables(enc.column_names, enc.prior, enc.alpha, enc.to_tables())
    test_cols = {"a": ["X", "Y", "Z"], "b": ["Q", "P", "R"]}
    assert np.array_equal(enc.encode_frozen(test_cols), again.encode_frozen(test_cols))
