"""Student-disjoint splitting, rank AUC, randomized grid search, and a
label-encoded logistic baseline for calibration."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .data_model import Dataset, LabeledRow
from .errors import ConfigInvalid, SingleClass, UnresolvableStudent
from .features import CATEGORICAL_NAMES, FeatureTable
from .gbdt import TrainParams, predict, train


@dataclass
class SplitSpec:
    """How to split labeled rows into student-disjoint train/valid sets."""

    fraction: float = 0.5
    seed: int = 0
    student_by_assignment: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_dataset(cls, d: Dataset, fraction: float = 0.5, seed: int = 0) -> "SplitSpec":
        return cls(
            fraction=fraction,
            seed=seed,
            student_by_assignment={
                a.assignment_id: a.student_id for a in d.assignments.values()
            },
        )


def split_by_student(
    rows: Sequence[LabeledRow], spec: SplitSpec
) -> tuple[list[LabeledRow], list[LabeledRow]]:
    """Partition rows so no student appears on both sides.

    Students are shuffled by the spec seed; the first ceil(fraction * n)
    students form the validation side.
    """
    if not (0.0 < spec.fraction < 1.0):
        raise ConfigInvalid(f"fraction must be in (0,1), got {spec.fraction}")
    students_of_rows = []
    for row in rows:
        student = spec.student_by_assignment.get(row.end_unit_assignment_id)
        if student is None:
            raise UnresolvableStudent(
                f"no student for assignment {row.end_unit_assignment_id!r}"
            )
        students_of_rows.append(student)

    unique_students = sorted(set(students_of_rows))
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    shuffled = list(rng.permutation(unique_students))
    n_valid = math.ceil(spec.fraction * len(shuffled))
    valid_students = set(shuffled[:n_valid])

    train_rows, valid_rows = [], []
    for row, student in zip(rows, students_of_rows):
        (valid_rows if student in valid_students else train_rows).append(row)
    return train_rows, valid_rows


def _binary_masks(labels) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels)
    pos = labels == 1
    neg = labels == 0
    if pos.sum() + neg.sum() != len(labels):
        raise ValueError("labels must be binary 0/1")
    if not pos.any() or not neg.any():
        raise SingleClass("AUC needs both classes")
    return pos, neg


def auc_exact(scores, labels) -> Fraction:
    """Tie-aware rank AUC as an exact rational number."""
    pos, _ = _binary_masks(labels)
    scores = np.asarray(scores, dtype=float)
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    _, counts = np.unique(sorted_scores, return_counts=True)
    ends = np.cumsum(counts)
    starts = ends - counts
    # doubled average rank of a tie group spanning 0-based [start, end) is
    # start + end + 1, an integer
    doubled_group = starts + ends + 1
    doubled_sorted = np.repeat(doubled_group, counts)
    doubled = np.empty(len(scores), dtype=np.int64)
    doubled[order] = doubled_sorted

    n_pos = int(pos.sum())
    n_neg = len(scores) - n_pos
    doubled_pos_sum = int(doubled[pos].sum())
    return Fraction(doubled_pos_sum - n_pos * (n_pos + 1), 2 * n_pos * n_neg)


def auc(scores, labels) -> float:
    """P(random positive outranks random negative), ties counted half."""
    return float(auc_exact(scores, labels))


@dataclass
class GridSpec:
    depth: list[int] = field(default_factory=lambda: list(range(1, 11)))
    iterations: list[int] = field(default_factory=lambda: [100, 250, 500, 1000])
    learning_rate: list[float] = field(
        default_factory=lambda: [0.001, 0.01, 0.03, 0.1, 0.2, 0.3]
    )
    l2_leaf_reg: list[float] = field(default_factory=lambda: [1, 3, 5, 10, 100])
    bagging_temperature: list[float] = field(
        default_factory=lambda: [0.03, 0.09, 0.25, 0.75]
    )
    random_strength: list[float] = field(default_factory=lambda: [0.2, 0.5, 0.8])

    def validate(self) -> None:
        for name in (
            "depth", "iterations", "learning_rate",
            "l2_leaf_reg", "bagging_temperature", "random_strength",
        ):
            if not getattr(self, name):
                raise ConfigInvalid(f"grid list {name!r} is empty")

    def axes(self) -> list[list]:
        return [
            self.depth, self.iterations, self.learning_rate,
            self.l2_leaf_reg, self.bagging_temperature, self.random_strength,
        ]

    def point(self, flat_index: int, base: TrainParams, seed: int) -> TrainParams:
        shape = tuple(len(a) for a in self.axes())
        coords = np.unravel_index(flat_index, shape)
        depth, iters, lr, l2, bt, rs = (
            axis[i] for axis, i in zip(self.axes(), coords)
        )
        return replace(
            base,
            max_depth=int(depth),
            n_iterations=int(iters),
            learning_rate=float(lr),
            l2_leaf_reg=float(l2),
            bagging_temperature=float(bt),
            langevin_noise=float(rs),  # random_strength drives gradient noise
            seed=seed,
        )


@dataclass
class TrialResult:
    trial: int
    params: TrainParams
    valid_auc: float


def grid_search(
    train_table: FeatureTable,
    valid_table: FeatureTable,
    grid: GridSpec,
    budget: int,
    seed: int = 0,
    base: Optional[TrainParams] = None,
    threads: int = 1,
) -> list[TrialResult]:
    """Evaluate a seeded random subsample of the grid; rank by valid AUC.

    The ranking is sorted by (AUC desc, trial index), so it is independent of
    how trials were scheduled.
    """
    if budget < 1:
        raise ConfigInvalid(f"budget must be >= 1, got {budget}")
    grid.validate()
    if base is None:
        base = TrainParams()
    total = int(np.prod([len(a) for a in grid.axes()]))
    rng = np.random.Generator(np.random.PCG64(seed))
    n_trials = min(budget, total)
    flat_indices = rng.choice(total, size=n_trials, replace=False)
    trial_seeds = [
        int(child.generate_state(1)[0])
        for child in np.random.SeedSequence(seed).spawn(n_trials)
    ]
    configs = [
        grid.point(int(flat), base, trial_seeds[i])
        for i, flat in enumerate(flat_indices)
    ]

    def run_trial(i: int) -> TrialResult:
        model = train(train_table, valid_table, configs[i])
        scores = predict(model, valid_table)
        return TrialResult(i, configs[i], auc(scores, valid_table.labels))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_trial, range(n_trials)))
    else:
        results = [run_trial(i) for i in range(n_trials)]
    return sorted(results, key=lambda r: (-r.valid_auc, r.trial))


def label_encode_columns(
    train_table: FeatureTable, other: FeatureTable
) -> tuple[np.ndarray, np.ndarray]:
    """Categoricals as integer codes fit on train; unseen values map to -1."""
    cols_train, cols_other = [], []
    for i in range(len(CATEGORICAL_NAMES)):
        train_values = train_table.categorical_column(i)
        codes = {v: c for c, v in enumerate(sorted(set(train_values)))}
        cols_train.append([codes[v] for v in train_values])
        cols_other.append([codes.get(v, -1) for v in other.categorical_column(i)])
    return (
        np.array(cols_train, dtype=float).T,
        np.array(cols_other, dtype=float).T,
    )


def logistic_design(
    train_table: FeatureTable, valid_table: FeatureTable
) -> tuple[np.ndarray, np.ndarray]:
    """Numeric + label-encoded categoricals, standardized on train, plus an
    intercept column."""
    cat_train, cat_valid = label_encode_columns(train_table, valid_table)
    x_train = np.hstack([train_table.numeric, cat_train])
    x_valid = np.hstack([valid_table.numeric, cat_valid])
    mean = x_train.mean(axis=0)
    std = x_train.std(axis=0)
    std[std == 0] = 1.0
    x_train = (x_train - mean) / std
    x_valid = (x_valid - mean) / std
    ones_t = np.ones((len(x_train), 1))
    ones_v = np.ones((len(x_valid), 1))
    return np.hstack([x_train, ones_t]), np.hstack([x_valid, ones_v])


def logistic_objective(w: np.ndarray, x: np.ndarray, y: np.ndarray, l2: float) -> float:
    z = np.clip(x @ w, -30, 30)
    p = 1.0 / (1.0 + np.exp(-z))
    p = np.clip(p, 1e-12, 1 - 1e-12)
    nll = -np.mean(y * np.log(p) + (1 - y) * np.log1p(-p))
    return float(nll + 0.5 * l2 * (w @ w))


def logistic_gradient(w: np.ndarray, x: np.ndarray, y: np.ndarray, l2: float) -> np.ndarray:
    z = np.clip(x @ w, -30, 30)
    p = 1.0 / (1.0 + np.exp(-z))
    return x.T @ (p - y) / len(y) + l2 * w


@dataclass
class LogisticFit:
    weights: np.ndarray
    valid_auc: float
    n_steps: int
    grad_norm: float


def logistic_baseline(
    train_table: FeatureTable,
    valid_table: FeatureTable,
    l2: float = 1e-3,
    tol: float = 1e-6,
    max_steps: int = 10_000,
) -> LogisticFit:
    """L2 logistic regression by fixed-step gradient descent."""
    if train_table.labels is None or set(int(v) for v in train_table.labels) != {0, 1}:
        raise SingleClass("training labels must contain both classes")
    x_train, x_valid = logistic_design(train_table, valid_table)
    y = np.asarray(train_table.labels, dtype=float)

    # Lipschitz constant of the gradient: ||X||_2^2 / (4n) + l2
    lipschitz = np.linalg.norm(x_train, 2) ** 2 / (4 * len(y)) + l2
    step = 1.0 / lipschitz
    w = np.zeros(x_train.shape[1])
    steps = 0
    grad = logistic_gradient(w, x_train, y, l2)
    while np.abs(grad).max() > tol and steps < max_steps:
        w = w - step * grad
        grad = logistic_gradient(w, x_train, y, l2)
        steps += 1

    scores = 1.0 / (1.0 + np.exp(-np.clip(x_valid @ w, -30, 30)))
    fit_auc = auc(scores, valid_table.labels) if valid_table.labels is not None else float("nan")
    return LogisticFit(
        weights=w, valid_auc=fit_auc, n_steps=steps, grad_norm=float(np.abs(grad).max())
    )
