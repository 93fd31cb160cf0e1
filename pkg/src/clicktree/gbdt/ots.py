"""Ordered target statistics: leakage-free encoding of categorical columns.

A category value in row k is replaced by the smoothed mean target of the rows
that precede k under a random permutation:

    (sum of earlier same-category targets + alpha * prior) /
    (count of earlier same-category rows  + alpha)

so the encoding of a row never sees that row's own label. Several
permutations are drawn for training; prediction uses the full-training-set
category statistics, frozen when fitting ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import LengthMismatch

DEFAULT_ALPHA = 0.1


def compute_ots(
    column: Sequence,
    targets: Sequence[float],
    sigma: Sequence[int],
    alpha: float = DEFAULT_ALPHA,
    prior: float = 0.5,
) -> np.ndarray:
    """Encode one categorical column under permutation ``sigma``.

    Returns the encoded values in original row order. The first occurrence of
    any category (no earlier same-category rows) encodes to ``prior``.
    """
    n = len(column)
    if len(targets) != n or len(sigma) != n:
        raise LengthMismatch(
            f"column/targets/sigma lengths differ: {n}/{len(targets)}/{len(sigma)}"
        )
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    out = np.empty(n)
    running: dict = {}
    for k in sigma:
        cat = column[k]
        total, count = running.get(cat, (0.0, 0))
        out[k] = (total + alpha * prior) / (count + alpha)
        running[cat] = (total + targets[k], count + 1)
    return out


def aggregate_stats(column: Sequence, targets: Sequence[float]) -> dict:
    """Full per-category (target sum, count) over all rows."""
    stats: dict = {}
    for cat, y in zip(column, targets):
        total, count = stats.get(cat, (0.0, 0))
        stats[cat] = (total + float(y), count + 1)
    return stats


@dataclass
class OtsEncoder:
    """Per-column category statistics plus the training permutations.

    ``frozen`` holds the full-training-set (sum, count) per category of each
    categorical column; prediction-time encoding is drawn from it, with
    unseen categories falling back to the prior.
    """

    column_names: list[str]
    prior: float
    alpha: float = DEFAULT_ALPHA
    permutations: list[np.ndarray] = field(default_factory=list)
    sigma_star: np.ndarray | None = None
    frozen: dict[str, dict] = field(default_factory=dict)

    @classmethod
    def fit(
        cls,
        columns: dict[str, Sequence],
        targets: Sequence[float],
        n_permutations: int,
        rng: np.random.Generator,
        alpha: float = DEFAULT_ALPHA,
    ) -> "OtsEncoder":
        targets = np.asarray(targets, dtype=float)
        n = len(targets)
        perms = [rng.permutation(n) for _ in range(n_permutations)]
        sigma_star = rng.permutation(n)
        enc = cls(
            column_names=list(columns),
            prior=float(targets.mean()),
            alpha=alpha,
            permutations=perms,
            sigma_star=sigma_star,
        )
        for name, values in columns.items():
            if len(values) != n:
                raise LengthMismatch(f"column {name!r} length {len(values)} != {n}")
            enc.frozen[name] = aggregate_stats(values, targets)
        return enc

    def encode_training(
        self, columns: dict[str, Sequence], targets: Sequence[float], perm_index: int
    ) -> np.ndarray:
        """(n, n_columns) training encoding under one stored permutation."""
        sigma = self.permutations[perm_index % len(self.permutations)]
        cols = [
            compute_ots(columns[name], targets, sigma, self.alpha, self.prior)
            for name in self.column_names
        ]
        return np.column_stack(cols)

    def encode_frozen(self, columns: dict[str, Sequence]) -> np.ndarray:
        """(n, n_columns) prediction encoding from the frozen statistics."""
        out = []
        for name in self.column_names:
            stats = self.frozen[name]
            col = np.empty(len(columns[name]))
            for i, cat in enumerate(columns[name]):
                entry = stats.get(cat)
                if entry is None:
                    col[i] = self.prior
                else:
                    total, count = entry
                    col[i] = (total + self.alpha * self.prior) / (count + self.alpha)
            out.append(col)
        return np.column_stack(out) if out else np.zeros((0, 0))

    def to_tables(self) -> dict:
        return {
            name: {str(cat): [total, count] for cat, (total, count) in stats.items()}
            for name, stats in self.frozen.items()
        }

    @classmethod
    def from_tables(cls, column_names, prior, alpha, tables) -> "OtsEncoder":
        enc = cls(column_names=list(column_names), prior=prior, alpha=alpha)
        enc.frozen = {
            name: {cat: (float(sc[0]), int(sc[1])) for cat, sc in stats.items()}
            for name, stats in tables.items()
        }
        return enc
