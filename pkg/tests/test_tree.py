import numpy as np
import pytest

from clicktree.gbdt import find_best_split, grow_tree, tree_predict
from clicktree.gbdt.tree import leaf_value, tree_from_dict, tree_to_dict

from naive_oracles import brute_best_split


def test_separable_gradient_perfect_split():
    x = np.array([[0.0], [1.0], [2.0], [3.0]])
    g = np.array([-1.0, -1.0, 1.0, 1.0])
    w = np.ones(4)
    split = find_best_split(x, g, w, l2=0.0)
    assert split is not None
    assert split.feature == 0
    assert split.threshold == pytest.approx(1.5)
    assert split.score_reduction == pytest.approx(4.0)


def test_constant_gradient_no_split():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(30, 3))
    for value in (0.0, 1.0, 0.5, -2.0):
        g = np.full(30, value)
        assert find_best_split(x, g, np.ones(30), l2=0.0) is None
        assert find_best_split(x, g, np.ones(30), l2=5.0) is None


def test_single_row_no_split():
    assert find_best_split(np.ones((1, 2)), np.ones(1), np.ones(1), 0.0) is None


def test_constant_feature_no_split():
    x = np.ones((10, 1))
    g = np.arange(10.0)
    assert find_best_split(x, g, np.ones(10), 0.0) is None


def test_tie_breaks_to_lowest_feature_and_threshold():
    # feature 1 duplicates feature 0; both separate g perfectly
    col = np.array([0.0, 0.0, 1.0, 1.0])
    x = np.column_stack([col, col])
    g = np.array([-1.0, -1.0, 1.0, 1.0])
    split = find_best_split(x, g, np.ones(4), 0.0)
    assert split.feature == 0


@pytest.mark.parametrize("trial", range(60))
def test_split_matches_exhaustive_enumeration(trial):
    rng = np.random.default_rng(trial)
    n = int(rng.integers(5, 80))
    n_features = int(rng.integers(1, 5))
    x = rng.normal(size=(n, n_features))
    if rng.random() < 0.3:
        x = np.round(x)  # force ties
    g = rng.normal(size=n)
    w = rng.uniform(0.1, 3.0, n)
    l2 = float(rng.choice([0.0, 1.0, 50.0]))
    mine = find_best_split(x, g, w, l2)
    ref = brute_best_split(x, g, w, l2)
    if ref is None:
        assert mine is None
    else:
        assert mine is not None
        assert mine.feature == ref[0]
        assert mine.threshold == pytest.approx(ref[1], abs=1e-12)


def test_grow_single_leaf_when_max_leaves_one():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(20, 2))
    g = rng.normal(size=20)
    w = np.ones(20)
    tree = grow_tree(x, g, w, l2=3.0, max_leaves=1)
    assert tree.is_leaf
    assert tree.value == pytest.approx((w * g).sum() / (w.sum() + 3.0))


def test_depth_one_gives_at_most_two_leaves():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(50, 3))
    g = rng.normal(size=50)
    tree = grow_tree(x, g, np.ones(50), l2=0.0, max_leaves=31, max_depth=1)

    def leaves(node):
        if node.is_leaf:
            return 1
        return leaves(node.left) + leaves(node.right)

    assert leaves(tree) <= 2


def test_xor_pattern_needs_depth_two():
    x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]] * 10)
    g = np.array([1.0, -1.0, -1.0, 1.0] * 10)
    w = np.ones(len(g))
    tree = grow_tree(x, g, w, l2=0.0, max_leaves=31, max_depth=2)
    predictions = tree_predict(tree, x)
    assert np.allclose(predictions, g, atol=1e-9)


def test_lossguide_respects_max_leaves():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(200, 4))
    g = rng.normal(size=200)
    tree = grow_tree(x, g, np.ones(200), l2=1.0, max_leaves=5, max_depth=10)

    def leaves(node):
        return 1 if node.is_leaf else leaves(node.left) + leaves(node.right)

    assert leaves(tree) <= 5


def test_presorted_matches_fresh_sort():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(120, 5))
    g = rng.normal(size=120)
    w = rng.uniform(0.5, 1.5, 120)
    fresh = grow_tree(x, g, w, l2=2.0)
    presorted = grow_tree(
        x, g, w, l2=2.0, presorted=np.argsort(x, axis=0, kind="stable")
    )
    assert np.array_equal(tree_predict(fresh, x), tree_predict(presorted, x))


def test_leaf_value_shrinks_with_l2():
    g = np.array([1.0, 1.0])
    w = np.ones(2)
    assert leaf_value(g, w, 0.0) == pytest.approx(1.0)
    assert leaf_value(g, w, 2.0) == pytest.approx(0.5)
    assert leaf_value(g, w, 1e12) == pytest.approx(0.0, abs=1e-11)


def test_tree_dict_roundtrip():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(100, 3))
    g = rng.normal(size=100)
    tree = grow_tree(x, g, np.ones(100), l2=1.0)
    again = tree_from_dict(tree_to_dict(tree))
    assert np.array_equal(tree_predict(tree, x), tree_predict(again, x))
