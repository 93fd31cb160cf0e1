import pytest

from clicktree.data_model import (
    ActionEvent,
    ActionKind,
    AssignmentInstance,
    Dataset,
    LabeledRow,
    Problem,
    parse_problem_type,
)
from clicktree.features import FeatureExtractor, build_feature_table, fit_pca
from clicktree.evaluation import SplitSpec, split_by_student
from clicktree.synthgen import GenConfig, generate_dataset

DEFAULT_SEQ = ("CURRICULUM_A", "G6_MATH", "UNIT_1", "TOPIC_1")


def make_dataset(events=(), rels=None, problems=(), assignments=(), rows=()):
    """Terse Dataset builder for hand-computed feature tests.

    events: (student, end_unit, in_unit, problem, kind_value) tuples,
    timestamps auto-increment per student. problems: (pid, type_value) or
    (pid, type_value, skill). assignments: (aid, student, is_end_unit).
    rows: (end_unit, problem, score_or_None).
    """
    clocks: dict[str, int] = {}
    event_objs = []
    for sid, eu, iu, pid, kind in events:
        ts = clocks.get(sid, 0)
        clocks[sid] = ts + 1
        event_objs.append(ActionEvent(ts, sid, eu, iu, pid, ActionKind(kind)))
    problem_objs = {}
    for spec in problems:
        pid, ptype = spec[0], spec[1]
        skill = spec[2] if len(spec) > 2 else "SK000"
        problem_objs[pid] = Problem(pid, parse_problem_type(ptype), skill)
    assignment_objs = {
        aid: AssignmentInstance(aid, sid, DEFAULT_SEQ, bool(end))
        for aid, sid, end in assignments
    }
    return Dataset(
        events=event_objs,
        relationships={k: list(v) for k, v in (rels or {}).items()},
        problems=problem_objs,
        assignments=assignment_objs,
        rows=[LabeledRow(eu, pid, score) for eu, pid, score in rows],
    )


@pytest.fixture(scope="session")
def default_dataset():
    return generate_dataset(GenConfig())


@pytest.fixture(scope="session")
def small_dataset():
    return generate_dataset(
        GenConfig(n_students=60, n_problems=400, problems_per_assignment=4, seed=3)
    )


@pytest.fixture(scope="session")
def small_tables(small_dataset):
    d, _ = small_dataset
    labeled = [r for r in d.rows if r.score is not None]
    train_rows, valid_rows = split_by_student(
        labeled, SplitSpec.from_dataset(d, 0.5, 0)
    )
    extractor = FeatureExtractor(d)
    projection = fit_pca(d.problems)
    train_table = build_feature_table(
        d, projection, "train", extractor=extractor, rows=train_rows
    )
    valid_table = build_feature_table(
        d, projection, "eval", column_mask=train_table.numeric_names,
        extractor=extractor, rows=valid_rows,
    )
    return train_table, valid_table
