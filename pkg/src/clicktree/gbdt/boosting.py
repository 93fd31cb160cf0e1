"""Cross-entropy boosting over lossguide trees with OTS-encoded categoricals.

Each iteration cycles to the next training permutation for the categorical
encoding, draws fresh Bayesian-bootstrap input weights, rebalances them with
sqrt class weights, fits a tree to the weighted negative gradient, and steps
the logits. A frozen encoding of the validation table tracks weighted
cross-entropy for early stopping; the model keeps every tree but predicts
with the prefix that minimized validation loss.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..errors import (
    ColumnMismatch,
    ConfigInvalid,
    CorruptModel,
    IoError,
    LengthMismatch,
    NoLabels,
    SingleClass,
    VersionMismatch,
)
from ..features import CATEGORICAL_NAMES, FeatureTable
from .ots import DEFAULT_ALPHA, OtsEncoder
from .tree import TreeNode, grow_tree, tree_from_dict, tree_predict, tree_to_dict

MODEL_FORMAT_VERSION = 1

_LOGIT_CLIP = 30.0
_PROB_CLIP = 1e-12


@dataclass
class TrainParams:
    n_iterations: int = 5000
    learning_rate: float = 0.01
    l2_leaf_reg: float = 200.0
    max_depth: int = 10
    max_leaves: int = 31
    s_permutations: int = 4
    bagging_temperature: float = 0.2
    langevin_noise: float = 0.0
    early_stopping_rounds: int = 100
    seed: int = 0

    def validate(self) -> None:
        if self.n_iterations < 1:
            raise ConfigInvalid("n_iterations must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigInvalid("learning_rate must be > 0")
        if self.l2_leaf_reg < 0:
            raise ConfigInvalid("l2_leaf_reg must be >= 0")
        if self.max_depth < 1 or self.max_leaves < 1:
            raise ConfigInvalid("max_depth and max_leaves must be >= 1")
        if self.s_permutations < 1:
            raise ConfigInvalid("s_permutations must be >= 1")
        if self.bagging_temperature < 0 or self.langevin_noise < 0:
            raise ConfigInvalid("temperatures must be >= 0")
        if self.early_stopping_rounds < 1:
            raise ConfigInvalid("early_stopping_rounds must be >= 1")


@dataclass
class GbdtModel:
    trees: list[TreeNode]
    tree_scales: list[float]
    encoder: OtsEncoder
    params: TrainParams
    best_iteration: int
    numeric_names: list[str]
    prior: float
    history: dict[str, list[float]] = field(default_factory=dict)

    @property
    def feature_names(self) -> list[str]:
        return self.numeric_names + list(CATEGORICAL_NAMES)


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -_LOGIT_CLIP, _LOGIT_CLIP)))


def bayesian_bootstrap_weights(
    n: int, temperature: float, rng: np.random.Generator
) -> np.ndarray:
    """Rubin-style weights (-ln U)^t; t = 0 yields exact unit weights."""
    u = rng.random(n)
    u = np.where(u == 0.0, np.finfo(float).tiny, u)
    return np.power(-np.log(u), temperature)


def class_weights(labels: np.ndarray, input_weights: np.ndarray) -> np.ndarray:
    """Sqrt-balanced class weight per row, from the input-weight class masses."""
    labels = np.asarray(labels)
    input_weights = np.asarray(input_weights, dtype=float)
    if len(labels) != len(input_weights):
        raise LengthMismatch(
            f"labels/input_weights lengths differ: {len(labels)}/{len(input_weights)}"
        )
    pos = labels == 1
    mass_pos = float(input_weights[pos].sum())
    mass_neg = float(input_weights[~pos].sum())
    if mass_pos == 0 or mass_neg == 0 or not (pos.any() and (~pos).any()):
        raise SingleClass("both classes must be present with nonzero weight")
    top = max(mass_pos, mass_neg)
    out = np.empty(len(labels))
    out[pos] = math.sqrt(top / mass_pos)
    out[~pos] = math.sqrt(top / mass_neg)
    return out


def cross_entropy(probs: np.ndarray, labels: np.ndarray, weights: np.ndarray) -> float:
    """Weighted cross-entropy with probabilities clipped away from {0, 1}."""
    p = np.clip(probs, _PROB_CLIP, 1.0 - _PROB_CLIP)
    y = np.asarray(labels, dtype=float)
    w = np.asarray(weights, dtype=float)
    return float(-(w * (y * np.log(p) + (1.0 - y) * np.log1p(-p))).sum() / w.sum())


def _categorical_columns(table: FeatureTable) -> dict[str, list[str]]:
    return {
        name: table.categorical_column(i) for i, name in enumerate(CATEGORICAL_NAMES)
    }


def _check_tables(train_table: FeatureTable, valid_table: FeatureTable) -> None:
    if train_table.numeric_names != valid_table.numeric_names:
        raise ColumnMismatch("train and valid tables have different numeric columns")
    if train_table.labels is None:
        raise NoLabels("training table has no labels")
    if valid_table.labels is None:
        raise NoLabels("validation table has no labels")
    classes = set(int(v) for v in train_table.labels)
    if classes != {0, 1}:
        raise SingleClass(f"training labels must contain both classes, got {classes}")


def _valid_ce_weights(valid_labels: np.ndarray) -> np.ndarray:
    ones = np.ones(len(valid_labels))
    try:
        return class_weights(valid_labels, ones)
    except SingleClass:
        return ones


def train(
    train_table: FeatureTable, valid_table: FeatureTable, params: TrainParams
) -> GbdtModel:
    """Boost until n_iterations or until validation CE stalls."""
    params.validate()
    _check_tables(train_table, valid_table)
    rng = np.random.Generator(np.random.PCG64(params.seed))

    y = np.asarray(train_table.labels, dtype=float)
    n = len(y)
    encoder = OtsEncoder.fit(
        _categorical_columns(train_table),
        y,
        params.s_permutations,
        rng,
        alpha=DEFAULT_ALPHA,
    )
    train_cats = _categorical_columns(train_table)
    x_perms = [
        np.ascontiguousarray(
            np.hstack([train_table.numeric, encoder.encode_training(train_cats, y, r)])
        )
        for r in range(params.s_permutations)
    ]
    # the s training matrices are fixed, so their column sort orders are too
    x_orders = [np.argsort(x, axis=0, kind="stable") for x in x_perms]
    x_valid = np.hstack(
        [valid_table.numeric, encoder.encode_frozen(_categorical_columns(valid_table))]
    )
    y_valid = np.asarray(valid_table.labels, dtype=float)
    w_valid = _valid_ce_weights(valid_table.labels)

    prior = float(np.clip(y.mean(), _PROB_CLIP, 1.0 - _PROB_CLIP))
    base_logit = math.log(prior / (1.0 - prior))
    train_logits = np.full(n, base_logit)
    valid_logits = np.full(len(y_valid), base_logit)

    trees: list[TreeNode] = []
    scales: list[float] = []
    train_ce_curve: list[float] = []
    valid_ce_curve: list[float] = [cross_entropy(sigmoid(valid_logits), y_valid, w_valid)]
    best_ce = valid_ce_curve[0]
    best_iteration = 0

    for m in range(params.n_iterations):
        x = x_perms[m % params.s_permutations]
        w_input = bayesian_bootstrap_weights(n, params.bagging_temperature, rng)
        w = w_input * class_weights(train_table.labels, w_input)
        p = sigmoid(train_logits)
        g = w * (y - p)
        if params.langevin_noise > 0:
            g = g + rng.normal(0.0, params.langevin_noise, n)

        tree = grow_tree(
            x, g, w,
            l2=params.l2_leaf_reg,
            max_leaves=params.max_leaves,
            max_depth=params.max_depth,
            presorted=x_orders[m % params.s_permutations],
        )
        trees.append(tree)
        scales.append(params.learning_rate)
        train_logits += params.learning_rate * tree_predict(tree, x)
        valid_logits += params.learning_rate * tree_predict(tree, x_valid)

        train_ce_curve.append(cross_entropy(sigmoid(train_logits), y, w))
        valid_ce = cross_entropy(sigmoid(valid_logits), y_valid, w_valid)
        valid_ce_curve.append(valid_ce)
        if valid_ce < best_ce:
            best_ce = valid_ce
            best_iteration = m + 1
        if (m + 1) - best_iteration >= params.early_stopping_rounds:
            break

    return GbdtModel(
        trees=trees,
        tree_scales=scales,
        encoder=encoder,
        params=params,
        best_iteration=best_iteration,
        numeric_names=list(train_table.numeric_names),
        prior=prior,
        history={"train_ce": train_ce_curve, "valid_ce": valid_ce_curve},
    )


def predict(model: GbdtModel, table: FeatureTable) -> np.ndarray:
    """Probabilities from the best-iteration tree prefix; pure per (model, row)."""
    if table.numeric_names != model.numeric_names:
        raise ColumnMismatch("feature table columns do not match the model")
    x = np.hstack(
        [table.numeric, model.encoder.encode_frozen(_categorical_columns(table))]
    )
    logits = np.full(len(x), math.log(model.prior / (1.0 - model.prior)))
    for tree, scale in zip(
        model.trees[: model.best_iteration], model.tree_scales[: model.best_iteration]
    ):
        logits += scale * tree_predict(tree, x)
    return sigmoid(logits)


def feature_importance(model: GbdtModel) -> list[tuple[str, float]]:
    """Split score reductions summed per feature over the kept trees,
    normalized to sum 1; descending."""
    names = model.feature_names
    totals = np.zeros(len(names))

    def walk(node: TreeNode) -> None:
        if node.is_leaf:
            return
        totals[node.feature] += node.gain
        walk(node.left)
        walk(node.right)

    for tree in model.trees[: model.best_iteration]:
        walk(tree)
    total = totals.sum()
    if total > 0:
        totals = totals / total
    order = sorted(range(len(names)), key=lambda i: (-totals[i], i))
    return [(names[i], float(totals[i])) for i in order]


def save_model(model: GbdtModel, path: str) -> None:
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "params": asdict(model.params),
        "prior": model.prior,
        "alpha": model.encoder.alpha,
        "ots_tables": model.encoder.to_tables(),
        "trees": [tree_to_dict(t) for t in model.trees],
        "tree_scales": model.tree_scales,
        "best_iteration": model.best_iteration,
        "feature_names": {
            "numeric": model.numeric_names,
            "categorical": list(CATEGORICAL_NAMES),
        },
        "history": model.history,
    }
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_model(path: str) -> GbdtModel:
    if not os.path.isfile(path):
        raise IoError(f"no such file: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptModel(f"cannot parse {path}: {exc}") from exc
    if not isinstance(doc, dict) or "version" not in doc:
        raise CorruptModel(f"{path}: missing version field")
    if doc["version"] != MODEL_FORMAT_VERSION:
        raise VersionMismatch(
            f"{path}: format version {doc['version']}, supported {MODEL_FORMAT_VERSION}"
        )
    try:
        encoder = OtsEncoder.from_tables(
            doc["feature_names"]["categorical"],
            float(doc["prior"]),
            float(doc["alpha"]),
            doc["ots_tables"],
        )
        return GbdtModel(
            trees=[tree_from_dict(t) for t in doc["trees"]],
            tree_scales=[float(s) for s in doc["tree_scales"]],
            encoder=encoder,
            params=TrainParams(**doc["params"]),
            best_iteration=int(doc["best_iteration"]),
            numeric_names=list(doc["feature_names"]["numeric"]),
            prior=float(doc["prior"]),
            history=doc.get("history", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModel(f"{path}: malformed model document: {exc}") from exc
