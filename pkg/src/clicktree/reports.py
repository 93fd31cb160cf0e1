"""CSV/JSON writers for the analytics and evaluation outputs, with figure
companions rendered alongside each table."""

from __future__ import annotations

import csv
import json
import os

from .analytics import cohort_report, difficulty_report
from .data_model import Dataset
from .features import FeatureExtractor
from . import figures

#: (file stem, group key, min occurrences, figure title)
DIFFICULTY_TABLES = (
    ("difficulty_by_type", "problem_type", 1, "average score by problem type"),
    ("difficulty_by_skill", "skill_code", 100, "hardest problem skills (n >= 100)"),
    ("difficulty_by_grade", "seq_level_2", 1, "average score by grade/subject"),
    ("difficulty_by_unit", "seq_level_3_4", 100, "hardest units (n >= 100)"),
)


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_difficulty_csv(rows, path: str) -> None:
    _write_csv(
        path,
        ["group", "mean_score", "n"],
        [[r.group, repr(r.mean_score), r.n] for r in rows],
    )


def write_cohort_csv(rows, path: str) -> None:
    _write_csv(
        path,
        ["action", "mean_struggling", "mean_successful", "p_value", "significant"],
        [
            [r.action, repr(r.mean_struggling), repr(r.mean_successful),
             repr(r.p_value), "true" if r.significant else "false"]
            for r in rows
        ],
    )


def write_importance_csv(items, path: str) -> None:
    _write_csv(
        path,
        ["feature", "importance"],
        [[name, repr(value)] for name, value in items],
    )


def write_metrics_json(metrics: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_analysis_reports(
    d: Dataset,
    out_dir: str,
    extractor: FeatureExtractor | None = None,
    render_figures: bool = True,
) -> list[str]:
    """The four difficulty tables plus the cohort comparison (CSV + PNG)."""
    os.makedirs(out_dir, exist_ok=True)
    if extractor is None:
        extractor = FeatureExtractor(d)
    written = []
    for stem, group_by, min_occ, title in DIFFICULTY_TABLES:
        rows = difficulty_report(d, group_by, min_occurrences=min_occ)
        path = os.path.join(out_dir, f"{stem}.csv")
        write_difficulty_csv(rows, path)
        written.append(path)
        if render_figures:
            fig_path = os.path.join(out_dir, f"{stem}.png")
            figures.difficulty_figure(rows, title, fig_path)
            written.append(fig_path)

    rows = cohort_report(d, extractor)
    path = os.path.join(out_dir, "cohort_comparison.csv")
    write_cohort_csv(rows, path)
    written.append(path)
    if render_figures:
        fig_path = os.path.join(out_dir, "cohort_comparison.png")
        figures.cohort_figure(rows, fig_path)
        written.append(fig_path)
    return written
