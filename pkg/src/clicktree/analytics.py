"""Descriptive analytics: difficulty rankings and the successful-vs-struggling
cohort comparison, computed over labeled rows."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .data_model import FEATURE_ACTIONS, Dataset
from .errors import DegenerateSample, NoLabels, SingleClass
from .features import FeatureExtractor

GROUP_KEYS = ("problem_type", "skill_code", "seq_level_2", "seq_level_3_4")

SIGNIFICANCE_ALPHA = 0.01


@dataclass
class DifficultyRow:
    group: str
    mean_score: float
    n: int


@dataclass
class CohortRow:
    action: str
    mean_struggling: float
    mean_successful: float
    p_value: float
    significant: bool


def _group_key(d: Dataset, row, group_by: str) -> str:
    if group_by == "problem_type":
        return d.problems[row.problem_id].problem_type.value
    if group_by == "skill_code":
        return d.problems[row.problem_id].skill_code
    assignment = d.assignments[row.end_unit_assignment_id]
    if group_by == "seq_level_2":
        return assignment.sequence_path[1]
    if group_by == "seq_level_3_4":
        return f"{assignment.sequence_path[2]}/{assignment.sequence_path[3]}"
    raise ValueError(f"group_by must be one of {GROUP_KEYS}, got {group_by!r}")


def difficulty_report(
    d: Dataset, group_by: str, min_occurrences: int = 100
) -> list[DifficultyRow]:
    """Mean score per group, hardest first; small groups are dropped."""
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for row in d.rows:
        if row.score is None:
            continue
        key = _group_key(d, row, group_by)
        sums[key] = sums.get(key, 0.0) + row.score
        counts[key] = counts.get(key, 0) + 1
    if not counts:
        raise NoLabels("difficulty report needs labeled rows")
    rows = [
        DifficultyRow(group=key, mean_score=sums[key] / counts[key], n=counts[key])
        for key in counts
        if counts[key] >= min_occurrences
    ]
    rows.sort(key=lambda r: (r.mean_score, r.group))
    return rows


def welch_t(sample_a, sample_b) -> tuple[float, float]:
    """Welch's two-sample t statistic and two-sided p value.

    The p value comes from the regularized incomplete beta function with
    Welch-Satterthwaite degrees of freedom.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise DegenerateSample("each sample needs at least 2 observations")
    var_a = a.var(ddof=1)
    var_b = b.var(ddof=1)
    if var_a == 0 and var_b == 0:
        raise DegenerateSample("both samples have zero variance")
    sa = var_a / len(a)
    sb = var_b / len(b)
    t = float((a.mean() - b.mean()) / math.sqrt(sa + sb))
    df = (sa + sb) ** 2 / (sa**2 / (len(a) - 1) + sb**2 / (len(b) - 1))
    # P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2)
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return t, p


def cohort_report(d: Dataset, extractor: FeatureExtractor | None = None) -> list[CohortRow]:
    """Per-action in-unit count means for successful (score 1) vs struggling
    (score 0) rows, with Welch p values at alpha 0.01."""
    if extractor is None:
        extractor = FeatureExtractor(d)
    unit_counts: dict[str, np.ndarray] = {}
    successful, struggling = [], []
    for row in d.rows:
        if row.score is None:
            continue
        u = row.end_unit_assignment_id
        vec = unit_counts.get(u)
        if vec is None:
            vec = extractor.assignment_action_counts(u)
            unit_counts[u] = vec
        (successful if row.score == 1 else struggling).append(vec)
    if not successful or not struggling:
        raise SingleClass("cohort report needs both successful and struggling rows")

    succ = np.array(successful)
    strug = np.array(struggling)
    out = []
    for i, kind in enumerate(FEATURE_ACTIONS):
        mean_succ = float(succ[:, i].mean())
        mean_strug = float(strug[:, i].mean())
        try:
            _, p = welch_t(strug[:, i], succ[:, i])
        except DegenerateSample:
            # constant in both cohorts: no evidence of a difference unless
            # the constants differ
            p = 1.0 if mean_succ == mean_strug else 0.0
        out.append(
            CohortRow(
                action=kind.value,
                mean_struggling=mean_strug,
                mean_successful=mean_succ,
                p_value=p,
                significant=p < SIGNIFICANCE_ALPHA,
            )
        )
    return out
