import numpy as np
import pytest

from clicktree.analytics import cohort_report, difficulty_report, welch_t
from clicktree.data_model import ActionKind
from clicktree.errors import DegenerateSample, NoLabels, SingleClass
from clicktree.synthgen import DEFAULT_TYPE_OFFSETS

from conftest import make_dataset


def test_difficulty_single_group_all_correct():
    d = make_dataset(
        problems=[("p1", "number")],
        assignments=[("eu1", "s1", True), ("eu2", "s2", True)],
        rows=[("eu1", "p1", 1), ("eu2", "p1", 1)],
    )
    rows = difficulty_report(d, "problem_type", min_occurrences=1)
    assert len(rows) == 1
    assert rows[0].mean_score == 1.0
    assert rows[0].n == 2


def test_difficulty_requires_labels():
    d = make_dataset(
        problems=[("p1", "number")],
        assignments=[("eu1", "s1", True)],
        rows=[("eu1", "p1", None)],
    )
    with pytest.raises(NoLabels):
        difficulty_report(d, "problem_type", min_occurrences=1)


def test_difficulty_sorted_ascending_and_filtered():
    problems = [("easy", "number"), ("hard", "ordering"), ("rare", "exact_fraction")]
    rows = (
        [(f"e{i}", "easy", 1) for i in range(4)]
        + [(f"h{i}", "hard", 0) for i in range(4)]
        + [("r0", "rare", 1)]
    )
    assignments = [(eu, "s1", True) for eu, _, _ in rows]
    d = make_dataset(problems=problems, assignments=assignments, rows=rows)
    report = difficulty_report(d, "problem_type", min_occurrences=2)
    assert [r.group for r in report] == ["ordering", "number"]
    means = [r.mean_score for r in report]
    assert means == sorted(means)


def test_difficulty_recovers_planted_type_ordering(default_dataset):
    d, _ = default_dataset
    report = difficulty_report(d, "problem_type", min_occurrences=1)
    reported_order = [r.group for r in report]
    planted_order = [
        t.value
        for t in sorted(DEFAULT_TYPE_OFFSETS, key=DEFAULT_TYPE_OFFSETS.get, reverse=True)
    ]
    assert reported_order == planted_order


def test_difficulty_group_means_in_unit_interval(default_dataset):
    d, _ = default_dataset
    labeled = sum(1 for r in d.rows if r.score is not None)
    for group_by in ("problem_type", "skill_code", "seq_level_2", "seq_level_3_4"):
        report = difficulty_report(d, group_by, min_occurrences=1)
        assert all(0.0 <= r.mean_score <= 1.0 for r in report)
        assert sum(r.n for r in report) <= labeled


def test_welch_identical_samples():
    t, p = welch_t([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert t == 0.0
    assert p == pytest.approx(1.0)


def test_welch_extreme_difference():
    t, p = welch_t([0.0, 0.0, 0.0, 0.0], [10.0, 10.0, 10.0, 10.0001])
    assert p < 1e-6
    assert t < 0


def test_welch_antisymmetric_in_swap():
    rng = np.random.default_rng(0)
    a = rng.normal(0, 1, 30)
    b = rng.normal(0.7, 2, 20)
    t_ab, p_ab = welch_t(a, b)
    t_ba, p_ba = welch_t(b, a)
    assert t_ab == pytest.approx(-t_ba)
    assert p_ab == pytest.approx(p_ba)


def test_welch_degenerate_samples():
    with pytest.raises(DegenerateSample):
        welch_t([1.0], [2.0, 3.0])
    with pytest.raises(DegenerateSample):
        welch_t([5.0, 5.0], [3.0, 3.0])


def test_welch_p_matches_simulation():
    # null calibration: both samples from one normal; P(p < alpha) ~ alpha,
    # checked via the simulated null distribution of the statistic itself
    rng = np.random.default_rng(1)
    n_draws = 20_000
    n_a, n_b = 12, 8
    p_values = np.empty(n_draws)
    for i in range(n_draws):
        a = rng.normal(size=n_a)
        b = rng.normal(size=n_b)
        _, p_values[i] = welch_t(a, b)
    for alpha in (0.01, 0.05, 0.2):
        assert abs((p_values < alpha).mean() - alpha) < 0.01


def cohort_toy():
    correct = ActionKind.CORRECT_RESPONSE.value
    hint = ActionKind.HINT_REQUESTED.value
    events = (
        [("s1", "eu1", "iu1", "p1", correct)] * 6
        + [("s2", "eu2", "iu2", "p1", correct)] * 2
        + [("s2", "eu2", "iu2", "p1", hint)] * 3
        + [("s3", "eu3", "iu3", "p1", correct)] * 5
        + [("s4", "eu4", "iu4", "p1", hint)] * 4
    )
    return make_dataset(
        events=events,
        rels={f"eu{i}": [f"iu{i}"] for i in range(1, 5)},
        problems=[("p1", "number")],
        assignments=[(f"eu{i}", f"s{i}", True) for i in range(1, 5)]
        + [(f"iu{i}", f"s{i}", False) for i in range(1, 5)],
        rows=[("eu1", "p1", 1), ("eu2", "p1", 0), ("eu3", "p1", 1), ("eu4", "p1", 0)],
    )


def test_cohort_report_means():
    report = cohort_report(cohort_toy())
    by_action = {r.action: r for r in report}
    row = by_action[ActionKind.CORRECT_RESPONSE.value]
    assert row.mean_successful == pytest.approx((6 + 5) / 2)
    assert row.mean_struggling == pytest.approx((2 + 0) / 2)
    hint_row = by_action[ActionKind.HINT_REQUESTED.value]
    assert hint_row.mean_struggling > hint_row.mean_successful
    assert all(0.0 <= r.p_value <= 1.0 for r in report)


def test_cohort_single_class_rejected():
    d = cohort_toy()
    for row in d.rows:
        object.__setattr__(row, "score", 1)
    with pytest.raises(SingleClass):
        cohort_report(d)


def test_cohort_pooled_mean_consistency(default_dataset):
    d, _ = default_dataset
    from clicktree.features import FeatureExtractor
    from clicktree.data_model import FEATURE_ACTIONS

    extractor = FeatureExtractor(d)
    report = cohort_report(d, extractor)
    labeled = [r for r in d.rows if r.score is not None]
    n_succ = sum(1 for r in labeled if r.score == 1)
    n_strug = len(labeled) - n_succ
    overall = np.zeros(len(FEATURE_ACTIONS))
    for r in labeled:
        overall += extractor.assignment_action_counts(r.end_unit_assignment_id)
    overall /= len(labeled)
    for i, row in enumerate(report):
        pooled = (
            row.mean_successful * n_succ + row.mean_struggling * n_strug
        ) / len(labeled)
        assert pooled == pytest.approx(overall[i])


def test_cohort_successful_do_more_correct_work(default_dataset):
    d, _ = default_dataset
    report = cohort_report(d)
    by_action = {r.action: r for r in report}
    assert (
        by_action[ActionKind.CORRECT_RESPONSE.value].mean_successful
        > by_action[ActionKind.CORRECT_RESPONSE.value].mean_struggling
    )
    assert (
        by_action[ActionKind.ANSWER_REQUESTED.value].mean_struggling
        > by_action[ActionKind.ANSWER_REQUESTED.value].mean_successful
    )


def test_cohort_null_significance_rate():
    # labels shuffled within one cohort copy: differences are pure noise
    rng = np.random.default_rng(5)
    correct = ActionKind.CORRECT_RESPONSE.value
    n = 400
    events = []
    rels, assignments, rows = {}, [], []
    for i in range(n):
        eu, iu, s = f"eu{i}", f"iu{i}", f"s{i}"
        rels[eu] = [iu]
        assignments += [(eu, s, True), (iu, s, False)]
        for _ in range(int(rng.integers(1, 8))):
            events.append((s, eu, iu, "p1", correct))
        rows.append((eu, "p1", int(rng.integers(0, 2))))
    d = make_dataset(
        events=events, rels=rels, problems=[("p1", "number")],
        assignments=assignments, rows=rows,
    )
    report = cohort_report(d)
    row = {r.action: r for r in report}[correct]
    assert row.p_value > 0.01  # a single null test rarely crosses alpha
