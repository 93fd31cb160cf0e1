"""Seeded generator of clickstream-shaped datasets with planted signal.

Latent structure: each student has an ability, each problem a difficulty
(type offset + noise). In-unit behavior and end-unit labels are Bernoulli
draws through a logistic link, so the recoverable signal and its Bayes-optimal
score are known exactly. Everything is driven by one PCG64 generator, so a
seed fully determines the output, byte for byte.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .data_model import (
    ActionEvent,
    ActionKind,
    AssignmentInstance,
    Dataset,
    LabeledRow,
    Problem,
    ProblemType,
)
from .errors import ConfigInvalid, IoError, MissingFile

#: Planted per-type difficulty offsets (higher = harder), select-all hardest.
#: Spacing 0.28 keeps the type ordering recoverable from ~500 students while
#: the oracle AUC of the default config stays near 0.85; the difficulty ranks
#: are arranged so their rank correlation with the types' alphabetical order
#: is ~0 (the type name alone orders nothing).
DEFAULT_TYPE_OFFSETS: dict[ProblemType, float] = {
    ProblemType.CHECK_ALL_THAT_APPLY: 1.26,
    ProblemType.NUMBER: 0.98,
    ProblemType.UNGRADED_OPEN_RESPONSE: 0.70,
    ProblemType.EXACT_MATCH_CASE_SENSITIVE: 0.42,
    ProblemType.ALGEBRAIC_EXPRESSION: 0.14,
    ProblemType.ORDERING: -0.14,
    ProblemType.MULTIPLE_CHOICE: -0.42,
    ProblemType.EXACT_MATCH_IGNORE_CASE: -0.70,
    ProblemType.NUMERIC_EXPRESSION: -0.98,
    ProblemType.EXACT_FRACTION: -1.26,
}

#: Tutoring request kinds and their base rates, applied to sigmoid(d - a).
_REQUEST_RATES = (
    (ActionKind.HINT_REQUESTED, 0.3),
    (ActionKind.ANSWER_REQUESTED, 0.2),
    (ActionKind.EXPLANATION_REQUESTED, 0.1),
)

_LABEL_ABILITY_GAIN = 1.5
_DIFFICULTY_NOISE = 0.5

_SEQ_LEVEL_1 = ("CURRICULUM_A", "CURRICULUM_B")
_SEQ_LEVEL_2 = ("G6_MATH", "G7_MATH", "G8_MATH", "ALGEBRA_1")

#: End-unit assignments test one curriculum unit, i.e. one difficulty band of
#: the sorted catalog; the topic (level 4) narrows it to a sub-band. Band
#: index (easy to hard) maps to names whose alphabetical order has zero rank
#: correlation with difficulty, so the labels themselves carry no numeric
#: ordering.
_UNIT_NAMES_BY_BAND = (
    "UNIT_D", "UNIT_G", "UNIT_A", "UNIT_F", "UNIT_C", "UNIT_H", "UNIT_B", "UNIT_E",
)
_TOPIC_NAMES_BY_SUBBAND = ("TOPIC_C", "TOPIC_A", "TOPIC_D", "TOPIC_B")
_N_BANDS = len(_UNIT_NAMES_BY_BAND)
_N_SUBBANDS = len(_TOPIC_NAMES_BY_SUBBAND)

#: Units are not assigned uniformly: introductory review units and exam-prep
#: units (the difficulty extremes) get the most assignments.
_BAND_WEIGHTS = (4.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 4.0)
_BAND_PROBS = np.array(_BAND_WEIGHTS) / sum(_BAND_WEIGHTS)



def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass(frozen=True)
class GenConfig:
    n_students: int = 500
    n_problems: int = 12000
    n_end_units_per_student: int = 4
    n_in_units_per_end_unit: int = 1
    problems_per_assignment: int = 6
    embedding_dim: int = 64
    seed: int = 7
    ability_noise: float = 1.0
    type_difficulty_offsets: dict[ProblemType, float] = field(
        default_factory=lambda: dict(DEFAULT_TYPE_OFFSETS)
    )

    def validate(self) -> None:
        counts = {
            "n_students": self.n_students,
            "n_problems": self.n_problems,
            "n_end_units_per_student": self.n_end_units_per_student,
            "n_in_units_per_end_unit": self.n_in_units_per_end_unit,
            "problems_per_assignment": self.problems_per_assignment,
        }
        for name, value in counts.items():
            if value < 1:
                raise ConfigInvalid(f"{name} must be >= 1, got {value}")
        if self.embedding_dim < 33:
            raise ConfigInvalid(
                f"embedding_dim must be >= 33, got {self.embedding_dim}"
            )
        if self.ability_noise < 0:
            raise ConfigInvalid("ability_noise must be >= 0")
        n_cells = _N_BANDS * _N_SUBBANDS
        if self.problems_per_assignment * n_cells > self.n_problems:
            raise ConfigInvalid(
                f"n_problems must be at least {n_cells} * problems_per_assignment "
                "so every unit/topic difficulty cell can fill an assignment"
            )


@dataclass
class GroundTruth:
    """Latent ability per student and difficulty per problem."""

    abilities: dict[str, float]
    difficulties: dict[str, float]

    def bayes_score(self, student_id: str, problem_id: str) -> float:
        """P(correct) under the label model, using the true latents."""
        return sigmoid(
            _LABEL_ABILITY_GAIN * self.abilities[student_id]
            - self.difficulties[problem_id]
        )


class _ProblemDeck:
    """Deals distinct problems, cycling a reshuffled deck for full coverage."""

    def __init__(self, ids: list[str], rng: np.random.Generator):
        self._ids = list(ids)
        self._rng = rng
        self._pos = len(self._ids)

    def deal(self, k: int) -> list[str]:
        out: list[str] = []
        while len(out) < k:
            if self._pos >= len(self._ids):
                self._rng.shuffle(self._ids)
                self._pos = 0
            candidate = self._ids[self._pos]
            self._pos += 1
            if candidate not in out:
                out.append(candidate)
        return out


def generate_dataset(cfg: GenConfig) -> tuple[Dataset, GroundTruth]:
    """Generate a strict-valid Dataset plus the latents that produced it."""
    cfg.validate()
    rng = np.random.Generator(np.random.PCG64(cfg.seed))

    student_ids = [f"ST{i:05d}" for i in range(cfg.n_students)]
    abilities = rng.normal(0.0, cfg.ability_noise, cfg.n_students)

    problem_ids = [f"PR{i:05d}" for i in range(cfg.n_problems)]
    type_list = list(ProblemType)
    type_idx = np.arange(cfg.n_problems) % len(type_list)
    rng.shuffle(type_idx)
    offsets = cfg.type_difficulty_offsets
    noise = rng.normal(0.0, _DIFFICULTY_NOISE, cfg.n_problems)
    # center the noise within each type so the planted type ordering is
    # identifiable from type means regardless of the problem draw
    for t in range(len(type_list)):
        mask = type_idx == t
        if mask.any():
            noise[mask] -= noise[mask].mean()
    difficulties = np.array(
        [offsets.get(type_list[t], 0.0) for t in type_idx]
    ) + noise
    embeddings = rng.normal(0.0, 1.0, (cfg.n_problems, cfg.embedding_dim))
    embeddings[:, 0] = difficulties
    n_skills = max(1, cfg.n_problems // 5)
    skill_idx = rng.integers(0, n_skills, cfg.n_problems)

    problems = {
        pid: Problem(
            problem_id=pid,
            problem_type=type_list[type_idx[i]],
            skill_code=f"SK{skill_idx[i]:03d}",
            embedding=tuple(float(v) for v in embeddings[i]),
        )
        for i, pid in enumerate(problem_ids)
    }

    difficulty_of = {pid: float(difficulties[i]) for i, pid in enumerate(problem_ids)}

    # In-unit practice mixes problems from the whole catalog; the end-unit
    # assignment tests its curriculum unit and topic, i.e. one cell of the
    # difficulty-sorted catalog.
    practice_deck = _ProblemDeck(problem_ids, rng)
    ranks = np.argsort(np.argsort(difficulties))
    n_cells = _N_BANDS * _N_SUBBANDS
    cell_of = ranks * n_cells // cfg.n_problems
    cell_decks = [
        [
            _ProblemDeck(
                [
                    pid for i, pid in enumerate(problem_ids)
                    if cell_of[i] == band * _N_SUBBANDS + sub
                ],
                rng,
            )
            for sub in range(_N_SUBBANDS)
        ]
        for band in range(_N_BANDS)
    ]

    assignments: dict[str, AssignmentInstance] = {}
    relationships: dict[str, list[str]] = {}
    events: list[ActionEvent] = []
    rows: list[LabeledRow] = []
    end_unit_serial = 0
    in_unit_serial = 0

    for si, sid in enumerate(student_ids):
        ability = float(abilities[si])
        clock = 0
        for _ in range(cfg.n_end_units_per_student):
            band = int(rng.choice(_N_BANDS, p=_BAND_PROBS))
            sub = int(rng.integers(0, _N_SUBBANDS))
            seq = (
                _SEQ_LEVEL_1[rng.integers(0, len(_SEQ_LEVEL_1))],
                _SEQ_LEVEL_2[rng.integers(0, len(_SEQ_LEVEL_2))],
                _UNIT_NAMES_BY_BAND[band],
                _TOPIC_NAMES_BY_SUBBAND[sub],
            )
            end_unit_id = f"EU{end_unit_serial:06d}"
            end_unit_serial += 1
            assignments[end_unit_id] = AssignmentInstance(end_unit_id, sid, seq, True)
            relationships[end_unit_id] = []

            for _ in range(cfg.n_in_units_per_end_unit):
                in_unit_id = f"IU{in_unit_serial:06d}"
                in_unit_serial += 1
                assignments[in_unit_id] = AssignmentInstance(
                    in_unit_id, sid, seq, False
                )
                relationships[end_unit_id].append(in_unit_id)

                for pid in practice_deck.deal(cfg.problems_per_assignment):
                    clock = _emit_problem_events(
                        events, rng, sid, end_unit_id, in_unit_id, pid,
                        ability, difficulty_of[pid], clock,
                    )

            for pid in cell_decks[band][sub].deal(cfg.problems_per_assignment):
                p_correct = sigmoid(_LABEL_ABILITY_GAIN * ability - difficulty_of[pid])
                score = 1 if rng.random() < p_correct else 0
                rows.append(LabeledRow(end_unit_id, pid, score))

    dataset = Dataset(
        events=events,
        relationships=relationships,
        problems=problems,
        assignments=assignments,
        rows=rows,
    )
    truth = GroundTruth(
        abilities={sid: float(abilities[i]) for i, sid in enumerate(student_ids)},
        difficulties=difficulty_of,
    )
    return dataset, truth


def _emit_problem_events(
    events, rng, sid, end_unit_id, in_unit_id, pid, ability, difficulty, clock
) -> int:
    """Append the event stream for one problem attempt; returns the clock."""

    def emit(kind):
        nonlocal clock
        events.append(ActionEvent(clock, sid, end_unit_id, in_unit_id, pid, kind))
        clock += 1

    emit(ActionKind.PROBLEM_STARTED)
    if rng.random() < sigmoid(ability - difficulty):
        emit(ActionKind.CORRECT_RESPONSE)
    else:
        emit(ActionKind.WRONG_RESPONSE)
    struggle = sigmoid(difficulty - ability)
    for kind, rate in _REQUEST_RATES:
        if rng.random() < struggle * rate:
            emit(kind)
    emit(ActionKind.PROBLEM_FINISHED)
    emit(ActionKind.CONTINUE_SELECTED)
    return clock


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_dataset(d: Dataset, out_dir: str) -> list[str]:
    """Write the five CSV files; returns the paths written."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out_dir}: {exc}") from exc
    paths = []

    path = os.path.join(out_dir, "action_logs.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(
            ["timestamp", "student_id", "in_unit_assignment_id", "problem_id", "action"]
        )
        # loading expands one logged action into consecutive events, one per
        # linked end unit; invert that by writing one row per such run
        run_key = None
        run_end_units: set[str] = set()
        for e in d.events:
            key = (e.timestamp, e.student_id, e.in_unit_assignment_id, e.problem_id, e.kind)
            if key == run_key and e.end_unit_assignment_id not in run_end_units:
                run_end_units.add(e.end_unit_assignment_id)
                continue
            run_key = key
            run_end_units = {e.end_unit_assignment_id}
            w.writerow(
                [e.timestamp, e.student_id, e.in_unit_assignment_id, e.problem_id, e.kind.value]
            )
    paths.append(path)

    path = os.path.join(out_dir, "relationships.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["end_unit_assignment_id", "in_unit_assignment_id"])
        for end_unit, in_units in d.relationships.items():
            for in_unit in in_units:
                w.writerow([end_unit, in_unit])
    paths.append(path)

    emb_dim = d.embedding_dim
    path = os.path.join(out_dir, "problems.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        header = ["problem_id", "problem_type", "skill_code"]
        if emb_dim is not None:
            header += [f"emb_{i}" for i in range(emb_dim)]
        w.writerow(header)
        for p in d.problems.values():
            row = [p.problem_id, p.problem_type.value, p.skill_code]
            if emb_dim is not None:
                if p.embedding is not None:
                    row += [repr(v) for v in p.embedding]
                else:
                    row += [""] * emb_dim
            w.writerow(row)
    paths.append(path)

    path = os.path.join(out_dir, "assignments.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(
            ["assignment_id", "student_id", "seq_level_1", "seq_level_2",
             "seq_level_3", "seq_level_4", "is_end_unit"]
        )
        for a in d.assignments.values():
            w.writerow(
                [a.assignment_id, a.student_id, *a.sequence_path,
                 "true" if a.is_end_unit else "false"]
            )
    paths.append(path)

    path = os.path.join(out_dir, "labels.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        any_score = any(r.score is not None for r in d.rows)
        include_score = any_score or not d.rows
        w.writerow(
            ["end_unit_assignment_id", "problem_id"] + (["score"] if include_score else [])
        )
        for r in d.rows:
            row = [r.end_unit_assignment_id, r.problem_id]
            if include_score:
                row.append("" if r.score is None else str(r.score))
            w.writerow(row)
    paths.append(path)
    return paths


def write_ground_truth(truth: GroundTruth, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["kind", "id", "value"])
        for sid, ability in truth.abilities.items():
            w.writerow(["student", sid, repr(ability)])
        for pid, difficulty in truth.difficulties.items():
            w.writerow(["problem", pid, repr(difficulty)])


def read_ground_truth(path: str) -> GroundTruth:
    if not os.path.isfile(path):
        raise MissingFile(f"no such file: {path}")
    abilities: dict[str, float] = {}
    difficulties: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for kind, ident, value in reader:
            if kind == "student":
                abilities[ident] = float(value)
            else:
                difficulties[ident] = float(value)
    return GroundTruth(abilities, difficulties)


def oracle_scores(truth: GroundTruth, d: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Bayes-optimal scores and labels for the labeled rows of ``d``."""
    scores, labels = [], []
    for r in d.rows:
        if r.score is None:
            continue
        sid = d.assignments[r.end_unit_assignment_id].student_id
        scores.append(truth.bayes_score(sid, r.problem_id))
        labels.append(r.score)
    return np.asarray(scores), np.asarray(labels)


def default_config(**overrides) -> GenConfig:
    return replace(GenConfig(), **overrides)
