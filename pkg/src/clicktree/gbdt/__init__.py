"""Gradient-boosted decision trees with ordered target statistics."""

from .ots import OtsEncoder, compute_ots
from .tree import Split, TreeNode, find_best_split, grow_tree, tree_predict
from .boosting import (
    GbdtModel,
    TrainParams,
    bayesian_bootstrap_weights,
    class_weights,
    cross_entropy,
    feature_importance,
    load_model,
    predict,
    save_model,
    train,
)

__all__ = [
    "OtsEncoder",
    "compute_ots",
    "Split",
    "TreeNode",
    "find_best_split",
    "grow_tree",
    "tree_predict",
    "GbdtModel",
    "TrainParams",
    "bayesian_bootstrap_weights",
    "class_weights",
    "cross_entropy",
    "feature_importance",
    "load_model",
    "predict",
    "save_model",
    "train",
]
