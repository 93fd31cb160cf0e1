"""Behavioral feature extraction from clickstream events.

Five count families (12 action kinds each), a signed per-problem performance
score, and 32 principal components of the problem embedding are assembled
into one dense row per (end-unit assignment, problem) target, plus five
categorical columns. A greedy Pearson filter prunes near-duplicate numeric
columns on the training split; the surviving column list is the mask that
evaluation tables must reuse.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data_model import (
    ACTION_INDEX,
    FEATURE_ACTIONS,
    ActionKind,
    Dataset,
    Problem,
)
from .errors import (
    ColumnMismatch,
    DimensionMismatch,
    InsufficientEmbeddings,
    IoError,
    MissingFile,
    SchemaMismatch,
    UnknownAssignment,
    UnknownStudent,
)

N_ACTIONS = len(FEATURE_ACTIONS)
N_COMPONENTS = 32

CATEGORICAL_NAMES = (
    "problem_type",
    "seq_level_1",
    "seq_level_2",
    "seq_level_3",
    "seq_level_4",
)

_FAMILY_PREFIXES = (
    "assignment_total",
    "student_total",
    "in_unit_avg",
    "problem_avg",
    "problem_weighted",
)

_CORRECT = ACTION_INDEX[ActionKind.CORRECT_RESPONSE]
_WRONG = ACTION_INDEX[ActionKind.WRONG_RESPONSE]


def numeric_feature_names() -> list[str]:
    """Full (pre-filter) numeric column order."""
    names = [
        f"{prefix}_{kind.value}"
        for prefix in _FAMILY_PREFIXES
        for kind in FEATURE_ACTIONS
    ]
    names.append("problem_level_performance")
    names += [f"embedding_pc_{i:02d}" for i in range(N_COMPONENTS)]
    names.append("embedding_missing")
    return names


def inverse_or_zero(x: np.ndarray) -> np.ndarray:
    """Elementwise 1/x with 0 at x == 0 (the weighting used throughout)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    np.divide(1.0, x, out=out, where=x != 0)
    return out


@dataclass
class ProblemGlobalStats:
    """Per-problem action totals over the entire event stream."""

    counts: dict[str, np.ndarray] = field(default_factory=dict)

    def get(self, problem_id: str) -> np.ndarray:
        vec = self.counts.get(problem_id)
        if vec is None:
            return np.zeros(N_ACTIONS)
        return vec


def build_problem_stats(d: Dataset) -> ProblemGlobalStats:
    stats = ProblemGlobalStats()
    for e in d.events:
        idx = ACTION_INDEX.get(e.kind)
        if idx is None:
            continue
        vec = stats.counts.get(e.problem_id)
        if vec is None:
            vec = np.zeros(N_ACTIONS)
            stats.counts[e.problem_id] = vec
        vec[idx] += 1
    return stats


class FeatureExtractor:
    """Indexes a Dataset once, then answers per-assignment feature queries.

    The heavy grouping pass (events by end unit / in unit / problem, plus
    per-student and per-problem totals) runs in the constructor; every
    query afterwards is dictionary lookups and small-vector arithmetic.
    """

    def __init__(self, dataset: Dataset, stats: Optional[ProblemGlobalStats] = None):
        self.dataset = dataset
        self.stats = stats if stats is not None else build_problem_stats(dataset)
        self._per_unit: dict[str, dict[str, dict[str, np.ndarray]]] = {}
        self._per_student: dict[str, np.ndarray] = {}
        self._students = {a.student_id for a in dataset.assignments.values()}
        for e in dataset.events:
            self._students.add(e.student_id)
            idx = ACTION_INDEX.get(e.kind)
            if idx is None:
                continue
            by_r = self._per_unit.setdefault(e.end_unit_assignment_id, {})
            by_p = by_r.setdefault(e.in_unit_assignment_id, {})
            vec = by_p.get(e.problem_id)
            if vec is None:
                vec = np.zeros(N_ACTIONS)
                by_p[e.problem_id] = vec
            vec[idx] += 1
            svec = self._per_student.get(e.student_id)
            if svec is None:
                svec = np.zeros(N_ACTIONS)
                self._per_student[e.student_id] = svec
            svec[idx] += 1

    def _check_assignment(self, u: str) -> None:
        if u not in self.dataset.assignments:
            raise UnknownAssignment(f"unknown assignment id {u!r}")

    def _linked(self, u: str) -> list[str]:
        return self.dataset.relationships.get(u, [])

    def assignment_action_counts(self, u: str) -> np.ndarray:
        """Total action counts over all in-unit work linked to end unit u."""
        self._check_assignment(u)
        total = np.zeros(N_ACTIONS)
        for by_p in self._per_unit.get(u, {}).values():
            for vec in by_p.values():
                total += vec
        return total

    def student_action_counts(self, s: str) -> np.ndarray:
        """Action counts over the student's entire event stream."""
        if s not in self._students:
            raise UnknownStudent(f"unknown student id {s!r}")
        return self._per_student.get(s, np.zeros(N_ACTIONS)).copy()

    def in_unit_avg_action_counts(self, u: str) -> np.ndarray:
        """Mean of per-in-unit action totals across the linked in units."""
        self._check_assignment(u)
        linked = self._linked(u)
        if not linked:
            return np.zeros(N_ACTIONS)
        by_r = self._per_unit.get(u, {})
        total = np.zeros(N_ACTIONS)
        for r in linked:
            for vec in by_r.get(r, {}).values():
                total += vec
        return total / len(linked)

    def problem_avg_action_counts(self, u: str) -> np.ndarray:
        """Mean over in units of the mean global action count of their problems."""
        self._check_assignment(u)
        linked = self._linked(u)
        if not linked:
            return np.zeros(N_ACTIONS)
        by_r = self._per_unit.get(u, {})
        total = np.zeros(N_ACTIONS)
        for r in linked:
            problems = by_r.get(r, {})
            if problems:
                inner = np.zeros(N_ACTIONS)
                for pid in problems:
                    inner += self.stats.get(pid)
                total += inner / len(problems)
        return total / len(linked)

    def problem_weighted_avg(self, u: str) -> np.ndarray:
        """Like the per-problem counts, but down-weighted by global frequency.

        Each (in unit, problem) contributes count / global-count per action
        (0 whenever the action was never globally observed on the problem),
        so rare actions weigh more.
        """
        self._check_assignment(u)
        linked = self._linked(u)
        if not linked:
            return np.zeros(N_ACTIONS)
        by_r = self._per_unit.get(u, {})
        total = np.zeros(N_ACTIONS)
        for r in linked:
            problems = by_r.get(r, {})
            if problems:
                inner = np.zeros(N_ACTIONS)
                for pid, vec in problems.items():
                    inner += inverse_or_zero(self.stats.get(pid)) * vec
                total += inner / len(problems)
        return total / len(linked)

    def problem_level_performance(self, u: str) -> float:
        """Signed per-problem performance, summed per in unit, averaged over them.

        A problem scores (correct count / global correct count) minus
        (wrong count / global wrong count).
        """
        self._check_assignment(u)
        linked = self._linked(u)
        if not linked:
            return 0.0
        by_r = self._per_unit.get(u, {})
        total = 0.0
        for r in linked:
            for pid, vec in by_r.get(r, {}).items():
                global_vec = self.stats.get(pid)
                correct = (
                    vec[_CORRECT] / global_vec[_CORRECT] if global_vec[_CORRECT] else 0.0
                )
                wrong = (
                    vec[_WRONG] / global_vec[_WRONG] if global_vec[_WRONG] else 0.0
                )
                total += correct - wrong
        return total / len(linked)

    def unit_feature_vector(self, u: str) -> np.ndarray:
        """All count families plus the performance score for one end unit."""
        student = self.dataset.assignments[u].student_id
        parts = [
            self.assignment_action_counts(u),
            self.student_action_counts(student),
            self.in_unit_avg_action_counts(u),
            self.problem_avg_action_counts(u),
            self.problem_weighted_avg(u),
            np.array([self.problem_level_performance(u)]),
        ]
        return np.concatenate(parts)


@dataclass
class Projection:
    """Mean vector plus top-k orthonormal principal components."""

    mean: np.ndarray
    components: np.ndarray  # (k, E)
    explained_variance: np.ndarray  # (k,)

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def input_dim(self) -> int:
        return self.components.shape[1]

    def project(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.input_dim:
            raise DimensionMismatch(
                f"expected vectors of dimension {self.input_dim}, got {x.shape[-1]}"
            )
        return (x - self.mean) @ self.components.T

    def reconstruct(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float) @ self.components + self.mean


def fit_pca(problems, k: int = N_COMPONENTS) -> Projection:
    """Fit a k-component PCA on the catalog's problem embeddings.

    Components are ordered by descending eigenvalue of the sample covariance
    and sign-fixed so each component's largest-magnitude coordinate is
    positive.
    """
    if isinstance(problems, dict):
        problems = problems.values()
    vectors = [p.embedding for p in problems if p.embedding is not None]
    if len(vectors) < k:
        raise InsufficientEmbeddings(
            f"need at least {k} problems with embeddings, found {len(vectors)}"
        )
    dims = {len(v) for v in vectors}
    if len(dims) != 1:
        raise DimensionMismatch(f"inconsistent embedding dimensions: {sorted(dims)}")
    dim = dims.pop()
    if dim < k:
        raise DimensionMismatch(f"embedding dimension {dim} < {k} components")

    x = np.asarray(vectors, dtype=float)
    mean = x.mean(axis=0)
    _, singular, vt = np.linalg.svd(x - mean, full_matrices=False)
    components = vt[:k].copy()
    explained = singular[:k] ** 2 / (len(vectors) - 1)
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    return Projection(mean=mean, components=components, explained_variance=explained)


@dataclass
class FeatureTable:
    """Dense numeric features + categorical columns, one row per target."""

    row_keys: list[tuple[str, str]]
    numeric: np.ndarray  # (n, F) float64
    numeric_names: list[str]
    categorical: list[tuple[str, ...]]  # n rows of len(CATEGORICAL_NAMES)
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.row_keys)
        if self.numeric.shape != (n, len(self.numeric_names)):
            raise ColumnMismatch(
                f"numeric shape {self.numeric.shape} vs {n} rows x "
                f"{len(self.numeric_names)} names"
            )
        if len(self.categorical) != n:
            raise ColumnMismatch("categorical rows misaligned with row_keys")
        if len(set(self.numeric_names)) != len(self.numeric_names):
            raise ColumnMismatch("duplicate numeric column names")
        if n and not np.isfinite(self.numeric).all():
            raise ColumnMismatch("numeric features contain NaN/Inf")

    @property
    def n_rows(self) -> int:
        return len(self.row_keys)

    def categorical_column(self, index: int) -> list[str]:
        return [row[index] for row in self.categorical]

    def select_numeric(self, names: Sequence[str]) -> "FeatureTable":
        index = {name: i for i, name in enumerate(self.numeric_names)}
        missing = [n for n in names if n not in index]
        if missing:
            raise ColumnMismatch(f"unknown numeric columns: {missing}")
        cols = [index[n] for n in names]
        return FeatureTable(
            row_keys=self.row_keys,
            numeric=self.numeric[:, cols],
            numeric_names=list(names),
            categorical=self.categorical,
            labels=self.labels,
        )


def correlation_filter(table: FeatureTable, threshold: float = 0.90) -> FeatureTable:
    """Greedily drop constant columns and later columns whose absolute
    Pearson correlation with a kept earlier column exceeds the threshold."""
    x = table.numeric
    n, n_cols = x.shape
    std = x.std(axis=0)
    keep: list[int] = []
    z_kept: list[np.ndarray] = []
    for j in range(n_cols):
        if std[j] == 0:
            continue
        zj = (x[:, j] - x[:, j].mean()) / std[j]
        if any(abs(float(zk @ zj) / n) > threshold for zk in z_kept):
            continue
        keep.append(j)
        z_kept.append(zj)
    return table.select_numeric([table.numeric_names[j] for j in keep])


def build_feature_table(
    dataset: Dataset,
    projection: Projection,
    split: str = "train",
    column_mask: Optional[Sequence[str]] = None,
    threshold: float = 0.90,
    extractor: Optional[FeatureExtractor] = None,
    rows=None,
    threads: int = 1,
) -> FeatureTable:
    """Assemble the feature table for ``rows`` (default: all dataset rows).

    ``split="train"`` applies the correlation filter and the result's
    ``numeric_names`` is the column mask; ``split="eval"`` requires that mask
    and reuses it verbatim. Per-end-unit extraction may run on ``threads``
    workers; the output does not depend on the schedule.
    """
    if split not in ("train", "eval"):
        raise ValueError(f"split must be 'train' or 'eval', got {split!r}")
    if split == "eval" and column_mask is None:
        raise ColumnMismatch("eval split requires the training column mask")
    if extractor is None:
        extractor = FeatureExtractor(dataset)
    if rows is None:
        rows = dataset.rows

    unit_cache: dict[str, np.ndarray] = {}
    if threads > 1:
        units = list(dict.fromkeys(r.end_unit_assignment_id for r in rows))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for u, vec in zip(units, pool.map(extractor.unit_feature_vector, units)):
                unit_cache[u] = vec
    names = numeric_feature_names()
    numeric = np.zeros((len(rows), len(names)))
    categorical: list[tuple[str, ...]] = []
    labels: list[Optional[int]] = []
    row_keys: list[tuple[str, str]] = []

    n_counts = 5 * N_ACTIONS + 1
    for i, row in enumerate(rows):
        u, pid = row.end_unit_assignment_id, row.problem_id
        unit_vec = unit_cache.get(u)
        if unit_vec is None:
            unit_vec = extractor.unit_feature_vector(u)
            unit_cache[u] = unit_vec
        numeric[i, :n_counts] = unit_vec

        problem = dataset.problems.get(pid)
        if problem is None:
            raise UnknownAssignment(f"row references unknown problem {pid!r}")
        if problem.embedding is not None:
            numeric[i, n_counts : n_counts + N_COMPONENTS] = projection.project(
                np.asarray(problem.embedding)
            )
        else:
            numeric[i, n_counts + N_COMPONENTS] = 1.0

        assignment = dataset.assignments[u]
        categorical.append((problem.problem_type.value, *assignment.sequence_path))
        labels.append(row.score)
        row_keys.append((u, pid))

    label_vec = (
        np.array(labels, dtype=int) if labels and all(v is not None for v in labels) else None
    )
    table = FeatureTable(
        row_keys=row_keys,
        numeric=numeric,
        numeric_names=names,
        categorical=categorical,
        labels=label_vec,
    )
    if split == "train":
        return correlation_filter(table, threshold)
    return table.select_numeric(column_mask)


def write_feature_table(table: FeatureTable, path: str) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = (
                ["end_unit_assignment_id", "problem_id"]
                + table.numeric_names
                + list(CATEGORICAL_NAMES)
            )
            if table.labels is not None:
                header.append("score")
            w.writerow(header)
            for i, (u, p) in enumerate(table.row_keys):
                row = [u, p]
                row += [repr(float(v)) for v in table.numeric[i]]
                row += list(table.categorical[i])
                if table.labels is not None:
                    row.append(str(int(table.labels[i])))
                w.writerow(row)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_feature_table(path: str) -> FeatureTable:
    if not os.path.isfile(path):
        raise MissingFile(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path}: empty file")
        if header[:2] != ["end_unit_assignment_id", "problem_id"]:
            raise SchemaMismatch(f"{path}: unexpected key columns {header[:2]}")
        has_score = header[-1] == "score"
        body = header[2 : -1 if has_score else len(header)]
        cat_set = set(CATEGORICAL_NAMES)
        numeric_names = [name for name in body if name not in cat_set]
        cat_positions = [2 + body.index(name) for name in CATEGORICAL_NAMES if name in body]
        if len(cat_positions) != len(CATEGORICAL_NAMES):
            raise SchemaMismatch(f"{path}: missing categorical columns")
        numeric_positions = [2 + body.index(name) for name in numeric_names]

        row_keys, numeric_rows, categorical, labels = [], [], [], []
        for row in reader:
            row_keys.append((row[0], row[1]))
            numeric_rows.append([float(row[i]) for i in numeric_positions])
            categorical.append(tuple(row[i] for i in cat_positions))
            if has_score:
                labels.append(int(row[-1]))
    numeric = (
        np.array(numeric_rows, dtype=float)
        if numeric_rows
        else np.zeros((0, len(numeric_names)))
    )
    return FeatureTable(
        row_keys=row_keys,
        numeric=numeric,
        numeric_names=numeric_names,
        categorical=categorical,
        labels=np.array(labels, dtype=int) if has_score else None,
    )


def write_mask(projection: Projection, kept_numeric: Sequence[str], path: str,
               threshold: float = 0.90) -> None:
    doc = {
        "kept_numeric": list(kept_numeric),
        "threshold": threshold,
        "projection": {
            "mean": projection.mean.tolist(),
            "components": projection.components.tolist(),
            "explained_variance": projection.explained_variance.tolist(),
        },
    }
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_mask(path: str) -> tuple[Projection, list[str], float]:
    if not os.path.isfile(path):
        raise MissingFile(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    proj = Projection(
        mean=np.array(doc["projection"]["mean"], dtype=float),
        components=np.array(doc["projection"]["components"], dtype=float),
        explained_variance=np.array(doc["projection"]["explained_variance"], dtype=float),
    )
    return proj, list(doc["kept_numeric"]), float(doc.get("threshold", 0.90))
