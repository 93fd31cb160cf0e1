"""End-to-end orchestration: generate/load, split, featurize, train, predict,
evaluate, analyze. Every stage writes its artifact under the output
directory; the returned metrics include the final validation AUC."""

from __future__ import annotations

import csv
import os
from typing import Optional

import numpy as np

from .config import RunConfig
from .data_model import Dataset, load_dataset
from .errors import NoLabels
from .evaluation import SplitSpec, auc, logistic_baseline, split_by_student
from .features import (
    FeatureExtractor,
    build_feature_table,
    fit_pca,
    write_feature_table,
    write_mask,
)
from .gbdt import feature_importance, predict, save_model, train
from .reports import write_analysis_reports, write_importance_csv, write_metrics_json
from .synthgen import (
    GroundTruth,
    generate_dataset,
    read_ground_truth,
    write_dataset,
    write_ground_truth,
)
from . import figures


def write_predictions(row_keys, scores, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["end_unit_assignment_id", "problem_id", "score_probability"])
        for (u, p), s in zip(row_keys, scores):
            w.writerow([u, p, repr(float(s))])


def _bayes_auc(truth: GroundTruth, d: Dataset, rows) -> Optional[float]:
    scores, labels = [], []
    for row in rows:
        if row.score is None:
            continue
        sid = d.assignments[row.end_unit_assignment_id].student_id
        if sid not in truth.abilities or row.problem_id not in truth.difficulties:
            return None
        scores.append(truth.bayes_score(sid, row.problem_id))
        labels.append(row.score)
    if not scores:
        return None
    return auc(np.array(scores), np.array(labels))


def run_pipeline(
    config: RunConfig,
    out_dir: str,
    data_dir: Optional[str] = None,
    render_figures: bool = True,
    threads: int = 1,
) -> dict:
    os.makedirs(out_dir, exist_ok=True)

    truth: Optional[GroundTruth] = None
    if data_dir is None:
        data_dir = os.path.join(out_dir, "data")
        dataset, truth = generate_dataset(config.generate)
        write_dataset(dataset, data_dir)
        write_ground_truth(truth, os.path.join(data_dir, "ground_truth.csv"))
    else:
        dataset = load_dataset(data_dir, "strict")
        truth_path = os.path.join(data_dir, "ground_truth.csv")
        if os.path.isfile(truth_path):
            truth = read_ground_truth(truth_path)

    labeled = [r for r in dataset.rows if r.score is not None]
    if not labeled:
        raise NoLabels(f"{data_dir}: no labeled rows to train on")
    spec = SplitSpec.from_dataset(dataset, config.split_fraction, config.split_seed)
    train_rows, valid_rows = split_by_student(labeled, spec)

    extractor = FeatureExtractor(dataset)
    projection = fit_pca(dataset.problems)
    train_table = build_feature_table(
        dataset, projection, split="train",
        extractor=extractor, rows=train_rows, threads=threads,
    )
    valid_table = build_feature_table(
        dataset, projection, split="eval",
        column_mask=train_table.numeric_names, extractor=extractor,
        rows=valid_rows, threads=threads,
    )
    write_feature_table(train_table, os.path.join(out_dir, "features_train.csv"))
    write_feature_table(valid_table, os.path.join(out_dir, "features_valid.csv"))
    write_mask(projection, train_table.numeric_names, os.path.join(out_dir, "mask.json"))

    model = train(train_table, valid_table, config.train)
    save_model(model, os.path.join(out_dir, "model.json"))

    scores = predict(model, valid_table)
    write_predictions(valid_table.row_keys, scores, os.path.join(out_dir, "preds.csv"))
    valid_auc = auc(scores, valid_table.labels)
    baseline = logistic_baseline(train_table, valid_table)

    reports_dir = os.path.join(out_dir, "reports")
    write_analysis_reports(dataset, reports_dir, extractor, render_figures)
    importance = feature_importance(model)
    write_importance_csv(importance, os.path.join(reports_dir, "feature_importance.csv"))
    if render_figures:
        figures.importance_figure(
            importance, os.path.join(reports_dir, "feature_importance.png")
        )
        figures.training_curves_figure(
            model.history, os.path.join(reports_dir, "training_curves.png")
        )

    metrics = {
        "auc": valid_auc,
        "baseline_auc": baseline.valid_auc,
        "bayes_auc": _bayes_auc(truth, dataset, valid_rows) if truth else None,
        "best_iteration": model.best_iteration,
        "n_trees": len(model.trees),
        "n_train_rows": train_table.n_rows,
        "n_valid_rows": valid_table.n_rows,
    }
    write_metrics_json(metrics, os.path.join(reports_dir, "metrics.json"))
    return metrics
