"""Regression trees grown leaf-by-leaf against gradient targets.

Split search is exact: every midpoint between adjacent sorted distinct
feature values is scored by the regularized weighted squared error of the two
children, with leaf values shrunk by the l2 term. Growth is lossguide: the
leaf with the largest score reduction splits first, bounded by max_leaves and
max_depth.

The hot loops are numba kernels. Feature columns are argsorted once per
node set; when a node splits, the children's sorted orders are obtained by a
stable partition of the parent's, so no re-sorting happens during growth.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

#: Relative guard against float jitter in prefix-sum SSE differences; genuine
#: reductions on non-degenerate data are many orders of magnitude larger.
_REDUCTION_EPS = 1e-12


@dataclass
class Split:
    feature: int
    threshold: float
    score_reduction: float


@dataclass
class TreeNode:
    """Either an internal split (left/right set) or a leaf carrying a value."""

    value: float = 0.0
    feature: int = -1
    threshold: float = 0.0
    gain: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def leaf_value(g: np.ndarray, w: np.ndarray, l2: float) -> float:
    denom = w.sum() + l2
    return float((w * g).sum() / denom) if denom > 0 else 0.0


@njit(cache=True)
def _node_sse(c, wsum, q, l2):
    # sum_i w_i (a - g_i)^2 with a = c/(wsum+l2), where c=sum(wg), q=sum(wg^2)
    denom = wsum + l2
    if denom <= 0.0:
        return q
    return q - c * c * (wsum + 2.0 * l2) / (denom * denom)


@njit(cache=True)
def _best_split_kernel(x, g, w, order, l2):
    """Scan all features over presorted row orders.

    Returns (feature, position, score_reduction); feature is -1 when no
    candidate beats the parent score. Ties resolve to the lowest feature
    index, then the lowest threshold, because the scan runs in that order and
    only strict improvements replace the incumbent.
    """
    n, n_features = order.shape
    total_w = 0.0
    total_c = 0.0
    total_q = 0.0
    for pos in range(n):
        row = order[pos, 0]
        wi = w[row]
        wg = wi * g[row]
        total_w += wi
        total_c += wg
        total_q += wg * g[row]
    parent = _node_sse(total_c, total_w, total_q, l2)
    eps = _REDUCTION_EPS * max(1.0, abs(parent))

    best_feature = -1
    best_pos = -1
    best_red = eps
    for j in range(n_features):
        cw = 0.0
        cc = 0.0
        cq = 0.0
        for pos in range(n - 1):
            row = order[pos, j]
            wi = w[row]
            wg = wi * g[row]
            cw += wi
            cc += wg
            cq += wg * g[row]
            if x[row, j] == x[order[pos + 1, j], j]:
                continue
            children = _node_sse(cc, cw, cq, l2) + _node_sse(
                total_c - cc, total_w - cw, total_q - cq, l2
            )
            red = parent - children
            if red > best_red:
                best_red = red
                best_feature = j
                best_pos = pos
    return best_feature, best_pos, best_red


@njit(cache=True)
def _partition_order(order, go_left, n_left):
    """Stable split of per-feature sorted orders by a row mask."""
    n, n_features = order.shape
    left = np.empty((n_left, n_features), dtype=order.dtype)
    right = np.empty((n - n_left, n_features), dtype=order.dtype)
    for j in range(n_features):
        li = 0
        ri = 0
        for pos in range(n):
            row = order[pos, j]
            if go_left[row]:
                left[li, j] = row
                li += 1
            else:
                right[ri, j] = row
                ri += 1
    return left, right


def _split_from_kernel(x, order, result) -> Optional[Split]:
    feature, pos, red = result
    if feature < 0:
        return None
    low = x[order[pos, feature], feature]
    high = x[order[pos + 1, feature], feature]
    return Split(
        feature=int(feature),
        threshold=float((low + high) / 2.0),
        score_reduction=float(red),
    )


def find_best_split(
    x: np.ndarray, g: np.ndarray, w: np.ndarray, l2: float
) -> Optional[Split]:
    """Exhaustive best split of one node, or None if nothing reduces its score.

    Ties break toward the lowest feature index, then the lowest threshold.
    """
    n = len(g)
    if n < 2:
        return None
    x = np.ascontiguousarray(x, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    order = np.argsort(x, axis=0, kind="stable")
    result = _best_split_kernel(x, g, w, order, float(l2))
    return _split_from_kernel(x, order, result)


def grow_tree(
    x: np.ndarray,
    g: np.ndarray,
    w: np.ndarray,
    l2: float,
    max_leaves: int = 31,
    max_depth: int = 10,
    presorted: Optional[np.ndarray] = None,
) -> TreeNode:
    """Lossguide growth: split the best-improving leaf until the limits bind.

    ``presorted`` may carry argsort(x, axis=0, kind="stable"), letting callers
    that reuse one matrix across many trees pay for sorting once.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    root = TreeNode(value=leaf_value(g, w, l2))
    if max_leaves < 2 or len(g) < 2:
        return root

    order0 = (
        presorted if presorted is not None else np.argsort(x, axis=0, kind="stable")
    )
    heap: list = []
    serial = 0

    def consider(node: TreeNode, order: np.ndarray, depth: int) -> None:
        nonlocal serial
        if depth >= max_depth or order.shape[0] < 2:
            return
        split = _split_from_kernel(
            x, order, _best_split_kernel(x, g, w, order, float(l2))
        )
        if split is not None:
            heapq.heappush(heap, (-split.score_reduction, serial, node, order, depth, split))
            serial += 1

    consider(root, order0, 0)
    n_leaves = 1
    while heap and n_leaves < max_leaves:
        _, _, node, order, depth, split = heapq.heappop(heap)
        go_left = x[:, split.feature] < split.threshold
        rows = order[:, 0]
        n_left = int(go_left[rows].sum())
        left_order, right_order = _partition_order(order, go_left, n_left)
        left_rows = left_order[:, 0]
        right_rows = right_order[:, 0]

        node.feature = split.feature
        node.threshold = split.threshold
        node.gain = split.score_reduction
        node.left = TreeNode(value=leaf_value(g[left_rows], w[left_rows], l2))
        node.right = TreeNode(value=leaf_value(g[right_rows], w[right_rows], l2))
        n_leaves += 1
        consider(node.left, left_order, depth + 1)
        consider(node.right, right_order, depth + 1)
    return root


def tree_predict(node: TreeNode, x: np.ndarray) -> np.ndarray:
    """Vectorized evaluation of one tree over a feature matrix."""
    out = np.empty(len(x))
    stack = [(node, np.arange(len(x)))]
    while stack:
        current, idx = stack.pop()
        if current.is_leaf:
            out[idx] = current.value
            continue
        mask = x[idx, current.feature] < current.threshold
        stack.append((current.left, idx[mask]))
        stack.append((current.right, idx[~mask]))
    return out


def tree_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"v": node.value}
    return {
        "f": node.feature,
        "t": node.threshold,
        "g": node.gain,
        "l": tree_to_dict(node.left),
        "r": tree_to_dict(node.right),
    }


def tree_from_dict(doc: dict) -> TreeNode:
    if "v" in doc:
        return TreeNode(value=float(doc["v"]))
    return TreeNode(
        feature=int(doc["f"]),
        threshold=float(doc["t"]),
        gain=float(doc["g"]),
        left=tree_from_dict(doc["l"]),
        right=tree_from_dict(doc["r"]),
    )
