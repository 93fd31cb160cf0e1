"""Command-line entry point: composable subcommands over the library.

Exit codes: 0 success, 1 usage error, 2 data/configuration error, 3 internal
error. All randomness derives from one seed, resolved as CLI flag >
CLICKTREE_SEED > config file > default.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
import sys

import click

from . import config as config_mod
from . import figures
from .data_model import load_dataset
from .errors import ClicktreeError, SingleClass
from .evaluation import auc_exact, grid_search
from .features import (
    FeatureExtractor,
    build_feature_table,
    fit_pca,
    read_feature_table,
    read_mask,
    write_feature_table,
    write_mask,
)
from .gbdt import feature_importance, load_model, predict, save_model, train
from .pipeline import run_pipeline, write_predictions
from .reports import write_analysis_reports, write_importance_csv
from .synthgen import generate_dataset, write_dataset, write_ground_truth

_seed_option = click.option(
    "--seed", type=int, default=None,
    help="Global seed (overrides CLICKTREE_SEED and the config file).",
)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def cli():
    """Clickstream features, boosted-tree training, and report generation."""


@cli.command()
@click.option("--config", "config_path", type=str, default=None,
              help="Run-config JSON; the 'generate' section applies.")
@click.option("--out", "out_dir", type=str, required=True,
              help="Directory for the five dataset CSVs and ground_truth.csv.")
@_seed_option
def generate(config_path, out_dir, seed):
    """Generate a seeded synthetic dataset with planted signal."""
    run_config = config_mod.load_run_config(config_path, seed)
    dataset, truth = generate_dataset(run_config.generate)
    write_dataset(dataset, out_dir)
    write_ground_truth(truth, os.path.join(out_dir, "ground_truth.csv"))
    click.echo(json.dumps({
        "out": out_dir,
        "n_events": len(dataset.events),
        "n_rows": len(dataset.rows),
        "seed": run_config.generate.seed,
    }))


@cli.command()
@click.option("--data", "data_dir", type=str, required=True,
              help="Directory holding the five dataset CSVs.")
@click.option("--out", "out_path", type=str, required=True,
              help="Feature CSV to write.")
@click.option("--mask", "mask_path", type=str, required=True,
              help="mask.json with kept columns and the PCA projection.")
@click.option("--reuse", is_flag=True,
              help="Apply an existing mask instead of fitting a new one.")
@click.option("--valid-out", type=str, default=None,
              help="Also split by student and write the validation table here.")
@click.option("--valid-fraction", type=float, default=0.5, show_default=True,
              help="Student fraction routed to the validation side.")
@click.option("--split-seed", type=int, default=None,
              help="Seed for the student shuffle (defaults to the global seed).")
@click.option("--mode", type=click.Choice(["strict", "lenient"]), default="strict",
              show_default=True, help="CSV loading mode.")
@click.option("--threads", type=int, default=os.cpu_count(), show_default="cores",
              help="Workers for per-end-unit extraction; output is identical for any N.")
@_seed_option
def featurize(data_dir, out_path, mask_path, reuse, valid_out, valid_fraction,
              split_seed, mode, threads, seed):
    """Extract the feature table (and optionally a student-disjoint split)."""
    from .evaluation import SplitSpec, split_by_student

    resolved_seed = config_mod.resolve_seed(seed, None)
    dataset = load_dataset(data_dir, mode)
    if reuse:
        projection, kept, _ = read_mask(mask_path)
        table = build_feature_table(
            dataset, projection, split="eval", column_mask=kept, threads=threads
        )
        write_feature_table(table, out_path)
        click.echo(json.dumps({"out": out_path, "n_rows": table.n_rows}))
        return

    projection = fit_pca(dataset.problems)
    extractor = FeatureExtractor(dataset)
    if valid_out is None:
        table = build_feature_table(
            dataset, projection, split="train", extractor=extractor, threads=threads
        )
        write_feature_table(table, out_path)
        write_mask(projection, table.numeric_names, mask_path)
        click.echo(json.dumps({"out": out_path, "n_rows": table.n_rows,
                               "n_numeric": len(table.numeric_names)}))
        return

    labeled = [r for r in dataset.rows if r.score is not None]
    spec = SplitSpec.from_dataset(
        dataset, valid_fraction,
        split_seed if split_seed is not None else resolved_seed,
    )
    train_rows, valid_rows = split_by_student(labeled, spec)
    train_table = build_feature_table(
        dataset, projection, split="train",
        extractor=extractor, rows=train_rows, threads=threads,
    )
    valid_table = build_feature_table(
        dataset, projection, split="eval", column_mask=train_table.numeric_names,
        extractor=extractor, rows=valid_rows, threads=threads,
    )
    write_feature_table(train_table, out_path)
    write_feature_table(valid_table, valid_out)
    write_mask(projection, train_table.numeric_names, mask_path)
    click.echo(json.dumps({
        "out": out_path, "valid_out": valid_out,
        "n_train_rows": train_table.n_rows, "n_valid_rows": valid_table.n_rows,
    }))


@cli.command(name="train")
@click.option("--features", "features_path", type=str, required=True,
              help="Training feature CSV (from featurize).")
@click.option("--valid", "valid_path", type=str, required=True,
              help="Validation feature CSV for early stopping.")
@click.option("--params", "params_path", type=str, default=None,
              help="TrainParams JSON; omitted fields use the defaults.")
@click.option("--out", "model_path", type=str, required=True,
              help="Model JSON to write.")
@_seed_option
def train_cmd(features_path, valid_path, params_path, model_path, seed):
    """Train the boosted-tree model with early stopping."""
    resolved_seed = config_mod.resolve_seed(seed, None)
    params = config_mod.load_train_params(params_path, resolved_seed)
    train_table = read_feature_table(features_path)
    valid_table = read_feature_table(valid_path)
    model = train(train_table, valid_table, params)
    save_model(model, model_path)
    click.echo(json.dumps({
        "out": model_path,
        "n_trees": len(model.trees),
        "best_iteration": model.best_iteration,
        "valid_ce": model.history["valid_ce"][model.best_iteration],
    }))


@cli.command(name="predict")
@click.option("--model", "model_path", type=str, required=True)
@click.option("--features", "features_path", type=str, required=True)
@click.option("--out", "out_path", type=str, required=True,
              help="preds.csv: end_unit_assignment_id,problem_id,score_probability")
def predict_cmd(model_path, features_path, out_path):
    """Score a feature table with a saved model."""
    model = load_model(model_path)
    table = read_feature_table(features_path)
    scores = predict(model, table)
    write_predictions(table.row_keys, scores, out_path)
    click.echo(json.dumps({"out": out_path, "n_rows": len(scores)}))


@cli.command()
@click.option("--preds", "preds_path", type=str, required=True)
@click.option("--labels", "labels_path", type=str, required=True)
def evaluate(preds_path, labels_path):
    """AUC of predictions against labels, printed as JSON."""
    scores = {}
    with open(preds_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            scores[(row["end_unit_assignment_id"], row["problem_id"])] = float(
                row["score_probability"]
            )
    paired_scores, paired_labels = [], []
    with open(labels_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            key = (row["end_unit_assignment_id"], row["problem_id"])
            if key in scores and row.get("score") not in (None, ""):
                paired_scores.append(scores[key])
                paired_labels.append(int(row["score"]))
    if not paired_scores:
        raise SingleClass("no overlapping labeled rows between preds and labels")
    value = auc_exact(paired_scores, paired_labels)
    n_pos = sum(paired_labels)
    click.echo(json.dumps({
        "auc": float(value),
        "n_pos": n_pos,
        "n_neg": len(paired_labels) - n_pos,
    }))


@cli.command()
@click.option("--data", "data_dir", type=str, required=True)
@click.option("--out", "out_dir", type=str, required=True,
              help="Report directory for the difficulty/cohort CSVs and figures.")
@click.option("--model", "model_path", type=str, default=None,
              help="Optional model JSON; adds feature_importance outputs.")
@click.option("--figures/--no-figures", "render_figures", default=True,
              show_default=True, help="Render PNG figures next to the CSVs.")
def analyze(data_dir, out_dir, model_path, render_figures):
    """Difficulty tables and the cohort comparison for a dataset."""
    dataset = load_dataset(data_dir, "strict")
    written = write_analysis_reports(dataset, out_dir, render_figures=render_figures)
    if model_path is not None:
        model = load_model(model_path)
        importance = feature_importance(model)
        path = os.path.join(out_dir, "feature_importance.csv")
        write_importance_csv(importance, path)
        written.append(path)
        if render_figures:
            fig_path = os.path.join(out_dir, "feature_importance.png")
            figures.importance_figure(importance, fig_path)
            written.append(fig_path)
    click.echo(json.dumps({"out": out_dir, "files": [os.path.basename(p) for p in written]}))


@cli.command()
@click.option("--grid", "grid_path", type=str, default=None,
              help="GridSpec JSON; defaults to the built-in ranges.")
@click.option("--budget", type=int, required=True,
              help="Number of configurations to evaluate.")
@click.option("--seed", type=int, default=None, help="Sampling seed.")
@click.option("--features", "features_path", type=str, required=True)
@click.option("--valid", "valid_path", type=str, required=True)
@click.option("--out", "out_path", type=str, default=None,
              help="Optional JSON file for the ranking (also printed).")
@click.option("--threads", type=int, default=os.cpu_count(), show_default="cores",
              help="Parallel trials; the ranking is identical for any N.")
def search(grid_path, budget, seed, features_path, valid_path, out_path, threads):
    """Randomized hyperparameter search ranked by validation AUC."""
    resolved_seed = config_mod.resolve_seed(seed, None)
    grid = config_mod.load_grid_spec(grid_path)
    train_table = read_feature_table(features_path)
    valid_table = read_feature_table(valid_path)
    ranking = grid_search(
        train_table, valid_table, grid, budget, seed=resolved_seed, threads=threads
    )
    doc = [
        {"rank": i, "valid_auc": r.valid_auc, "trial": r.trial,
         "params": dataclasses.asdict(r.params)}
        for i, r in enumerate(ranking)
    ]
    if out_path is not None:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    click.echo(json.dumps(doc))


@cli.command()
@click.option("--config", "config_path", type=str, default=None,
              help="Run-config JSON (seed/generate/train/split sections).")
@click.option("--out", "out_dir", type=str, required=True,
              help="Directory for all pipeline artifacts.")
@click.option("--data", "data_dir", type=str, default=None,
              help="Existing dataset directory (skips generation).")
@click.option("--figures/--no-figures", "render_figures", default=True,
              show_default=True)
@click.option("--threads", type=int, default=os.cpu_count(), show_default="cores",
              help="Workers for parallel stages; results are identical for any N.")
@_seed_option
def pipeline(config_path, out_dir, data_dir, render_figures, threads, seed):
    """Run generate, featurize, train, predict, evaluate, and analyze."""
    run_config = config_mod.load_run_config(config_path, seed)
    metrics = run_pipeline(
        run_config, out_dir, data_dir=data_dir,
        render_figures=render_figures, threads=threads,
    )
    click.echo(json.dumps(metrics, sort_keys=True))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        return 1
    except ClicktreeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
