"""Domain types for clickstream data and CSV ingestion of the five input files.

The on-disk layout is five UTF-8 CSV files with header rows:

    action_logs.csv    timestamp,student_id,in_unit_assignment_id,problem_id,action
    relationships.csv  end_unit_assignment_id,in_unit_assignment_id
    problems.csv       problem_id,problem_type,skill_code[,emb_0..emb_{E-1}]
    assignments.csv    assignment_id,student_id,seq_level_1..4,is_end_unit
    labels.csv         end_unit_assignment_id,problem_id[,score]

Loading resolves each logged action to the end-unit assignment(s) its in-unit
assignment is linked to; an event whose in-unit feeds several end-units is
duplicated once per link. A loaded Dataset is immutable by convention and safe
to share read-only.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .errors import (
    DanglingReference,
    DuplicateRow,
    MissingFile,
    SchemaMismatch,
)

UNKNOWN_LEVEL = "UNKNOWN"

DATASET_FILES = (
    "action_logs.csv",
    "relationships.csv",
    "problems.csv",
    "assignments.csv",
    "labels.csv",
)


class ActionKind(str, Enum):
    """The closed vocabulary of logged student actions.

    ``OTHER`` is a lenient-mode bucket for unrecognized action strings; it is
    excluded from every feature vector.
    """

    ASSIGNMENT_STARTED = "assignment_started"
    ASSIGNMENT_FINISHED = "assignment_finished"
    ASSIGNMENT_RESUMED = "assignment_resumed"
    PROBLEM_STARTED = "problem_started"
    PROBLEM_FINISHED = "problem_finished"
    CORRECT_RESPONSE = "correct_response"
    WRONG_RESPONSE = "wrong_response"
    OPEN_RESPONSE = "open_response"
    CONTINUE_SELECTED = "continue_selected"
    HINT_REQUESTED = "hint_requested"
    EXPLANATION_REQUESTED = "explanation_requested"
    ANSWER_REQUESTED = "answer_requested"
    OTHER = "other"


#: The 12 feature-bearing action kinds, in canonical column order.
FEATURE_ACTIONS: tuple[ActionKind, ...] = tuple(
    k for k in ActionKind if k is not ActionKind.OTHER
)

ACTION_INDEX = {kind: i for i, kind in enumerate(FEATURE_ACTIONS)}


class ProblemType(str, Enum):
    NUMBER = "number"
    ALGEBRAIC_EXPRESSION = "algebraic_expression"
    NUMERIC_EXPRESSION = "numeric_expression"
    CHECK_ALL_THAT_APPLY = "check_all_that_apply"
    MULTIPLE_CHOICE = "multiple_choice"
    EXACT_MATCH_CASE_SENSITIVE = "exact_match_case_sensitive"
    EXACT_MATCH_IGNORE_CASE = "exact_match_ignore_case"
    EXACT_FRACTION = "exact_fraction"
    ORDERING = "ordering"
    UNGRADED_OPEN_RESPONSE = "ungraded_open_response"


_ACTION_BY_VALUE = {k.value: k for k in ActionKind if k is not ActionKind.OTHER}
_TYPE_BY_VALUE = {t.value: t for t in ProblemType}


@dataclass(frozen=True, slots=True)
class ActionEvent:
    """One timestamped student action, resolved to its end-unit context."""

    timestamp: int
    student_id: str
    end_unit_assignment_id: str
    in_unit_assignment_id: str
    problem_id: str
    kind: ActionKind


@dataclass(frozen=True)
class Problem:
    problem_id: str
    problem_type: ProblemType
    skill_code: str = ""
    embedding: Optional[tuple[float, ...]] = None


@dataclass(frozen=True)
class AssignmentInstance:
    assignment_id: str
    student_id: str
    sequence_path: tuple[str, str, str, str]
    is_end_unit: bool


@dataclass(frozen=True)
class LabeledRow:
    """One (end-unit assignment, problem) prediction target.

    ``score`` is None for test rows that carry no label.
    """

    end_unit_assignment_id: str
    problem_id: str
    score: Optional[int] = None


@dataclass
class Dataset:
    """Everything loaded from one data directory.

    Immutable after load by convention; ``drop_count`` is the number of
    records a lenient load discarded (0 after a strict load).
    """

    events: list[ActionEvent] = field(default_factory=list)
    relationships: dict[str, list[str]] = field(default_factory=dict)
    problems: dict[str, Problem] = field(default_factory=dict)
    assignments: dict[str, AssignmentInstance] = field(default_factory=dict)
    rows: list[LabeledRow] = field(default_factory=list)
    drop_count: int = 0

    @property
    def embedding_dim(self) -> Optional[int]:
        for p in self.problems.values():
            if p.embedding is not None:
                return len(p.embedding)
        return None


@dataclass
class ValidationReport:
    n_students: int
    n_assignments: int
    n_problems: int
    n_rows: int
    n_events: int
    n_labeled: int
    label_balance: Optional[float]
    orphan_problem_ids: list[str]
    orphan_assignment_ids: list[str]

    @property
    def n_orphans(self) -> int:
        return len(self.orphan_problem_ids) + len(self.orphan_assignment_ids)


def parse_action(raw: str, lenient: bool) -> ActionKind:
    kind = _ACTION_BY_VALUE.get(raw)
    if kind is None:
        if lenient:
            return ActionKind.OTHER
        raise SchemaMismatch(f"action_logs.csv column 'action': unknown value {raw!r}")
    return kind


def parse_problem_type(raw: str) -> ProblemType:
    ptype = _TYPE_BY_VALUE.get(raw)
    if ptype is None:
        raise SchemaMismatch(
            f"problems.csv column 'problem_type': unknown value {raw!r}"
        )
    return ptype


def _read_csv(path: str, required: tuple[str, ...], file_label: str):
    """Return (header, rows) after checking the required leading columns."""
    if not os.path.isfile(path):
        raise MissingFile(f"{file_label}: no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{file_label}: empty file, expected a header row")
        for i, name in enumerate(required):
            if i >= len(header) or header[i] != name:
                got = header[i] if i < len(header) else "<missing>"
                raise SchemaMismatch(
                    f"{file_label}: expected column {name!r} at position {i}, got {got!r}"
                )
        rows = list(reader)
    return header, rows


def _parse_bool(raw: str, file_label: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1"):
        return True
    if low in ("false", "0"):
        return False
    raise SchemaMismatch(f"{file_label} column 'is_end_unit': bad value {raw!r}")


class _Loader:
    """Single-use helper carrying strict/lenient state through one load."""

    def __init__(self, data_dir: str, lenient: bool):
        self.dir = data_dir
        self.lenient = lenient
        self.dropped = 0

    def path(self, name: str) -> str:
        return os.path.join(self.dir, name)

    def violation(self, exc_type, message: str) -> None:
        """Raise in strict mode, count a drop in lenient mode."""
        if self.lenient:
            self.dropped += 1
        else:
            raise exc_type(message)

    def load_problems(self) -> dict[str, Problem]:
        header, raw_rows = _read_csv(
            self.path("problems.csv"),
            ("problem_id", "problem_type", "skill_code"),
            "problems.csv",
        )
        emb_cols = header[3:]
        for i, name in enumerate(emb_cols):
            if name != f"emb_{i}":
                raise SchemaMismatch(
                    f"problems.csv: expected embedding column 'emb_{i}', got {name!r}"
                )
        problems: dict[str, Problem] = {}
        for row in raw_rows:
            pid = row[0]
            if not pid:
                self.violation(SchemaMismatch, "problems.csv: empty problem_id")
                continue
            if pid in problems:
                self.violation(DuplicateRow, f"problems.csv: duplicate problem_id {pid!r}")
                continue
            try:
                ptype = parse_problem_type(row[1])
            except SchemaMismatch:
                if self.lenient:
                    self.dropped += 1
                    continue
                raise
            embedding = None
            if emb_cols:
                cells = row[3 : 3 + len(emb_cols)]
                if any(c != "" for c in cells):
                    try:
                        embedding = tuple(float(c) for c in cells)
                    except ValueError:
                        self.violation(
                            SchemaMismatch,
                            f"problems.csv: non-numeric embedding for {pid!r}",
                        )
                        continue
            problems[pid] = Problem(pid, ptype, row[2], embedding)
        return problems

    def load_assignments(self) -> dict[str, AssignmentInstance]:
        _, raw_rows = _read_csv(
            self.path("assignments.csv"),
            (
                "assignment_id",
                "student_id",
                "seq_level_1",
                "seq_level_2",
                "seq_level_3",
                "seq_level_4",
                "is_end_unit",
            ),
            "assignments.csv",
        )
        assignments: dict[str, AssignmentInstance] = {}
        for row in raw_rows:
            aid, sid = row[0], row[1]
            if not aid or not sid:
                self.violation(SchemaMismatch, "assignments.csv: empty id")
                continue
            if aid in assignments:
                self.violation(
                    DuplicateRow, f"assignments.csv: duplicate assignment_id {aid!r}"
                )
                continue
            levels = tuple(cell if cell else UNKNOWN_LEVEL for cell in row[2:6])
            assignments[aid] = AssignmentInstance(
                aid, sid, levels, _parse_bool(row[6], "assignments.csv")
            )
        return assignments

    def load_relationships(
        self, assignments: dict[str, AssignmentInstance]
    ) -> dict[str, list[str]]:
        _, raw_rows = _read_csv(
            self.path("relationships.csv"),
            ("end_unit_assignment_id", "in_unit_assignment_id"),
            "relationships.csv",
        )
        rel: dict[str, list[str]] = {}
        for row in raw_rows:
            end_unit, in_unit = row[0], row[1]
            if end_unit not in assignments or in_unit not in assignments:
                missing = end_unit if end_unit not in assignments else in_unit
                self.violation(
                    DanglingReference,
                    f"relationships.csv: unknown assignment_id {missing!r}",
                )
                continue
            if end_unit == in_unit:
                # the acyclicity invariant: no assignment feeds itself
                self.violation(
                    DanglingReference,
                    f"relationships.csv: {end_unit!r} linked to itself",
                )
                continue
            rel.setdefault(end_unit, []).append(in_unit)
        return rel

    def load_events(
        self,
        problems: dict[str, Problem],
        assignments: dict[str, AssignmentInstance],
        relationships: dict[str, list[str]],
    ) -> list[ActionEvent]:
        _, raw_rows = _read_csv(
            self.path("action_logs.csv"),
            ("timestamp", "student_id", "in_unit_assignment_id", "problem_id", "action"),
            "action_logs.csv",
        )
        # reverse map, preserving relationships.csv order of end units
        end_units_of: dict[str, list[str]] = {}
        for end_unit, in_units in relationships.items():
            for in_unit in in_units:
                end_units_of.setdefault(in_unit, []).append(end_unit)

        events: list[ActionEvent] = []
        for row in raw_rows:
            try:
                ts = int(row[0])
            except ValueError:
                self.violation(
                    SchemaMismatch, f"action_logs.csv column 'timestamp': {row[0]!r}"
                )
                continue
            sid, in_unit, pid, action_raw = row[1], row[2], row[3], row[4]
            if ts < 0 or not sid or not in_unit or not pid:
                self.violation(SchemaMismatch, "action_logs.csv: invalid row")
                continue
            if in_unit not in assignments:
                self.violation(
                    DanglingReference,
                    f"action_logs.csv: unknown in_unit_assignment_id {in_unit!r}",
                )
                continue
            if pid not in problems:
                self.violation(
                    DanglingReference, f"action_logs.csv: unknown problem_id {pid!r}"
                )
                continue
            kind = parse_action(action_raw, self.lenient)
            linked = end_units_of.get(in_unit)
            if not linked:
                self.violation(
                    DanglingReference,
                    f"action_logs.csv: in-unit {in_unit!r} has no end-unit link",
                )
                continue
            for end_unit in linked:
                events.append(ActionEvent(ts, sid, end_unit, in_unit, pid, kind))
        return events

    def load_rows(
        self,
        problems: dict[str, Problem],
        assignments: dict[str, AssignmentInstance],
    ) -> list[LabeledRow]:
        header, raw_rows = _read_csv(
            self.path("labels.csv"),
            ("end_unit_assignment_id", "problem_id"),
            "labels.csv",
        )
        has_score = len(header) > 2 and header[2] == "score"
        seen: set[tuple[str, str]] = set()
        rows: list[LabeledRow] = []
        for row in raw_rows:
            end_unit, pid = row[0], row[1]
            if end_unit not in assignments:
                self.violation(
                    DanglingReference,
                    f"labels.csv: unknown end_unit_assignment_id {end_unit!r}",
                )
                continue
            if pid not in problems:
                self.violation(
                    DanglingReference, f"labels.csv: unknown problem_id {pid!r}"
                )
                continue
            key = (end_unit, pid)
            if key in seen:
                self.violation(DuplicateRow, f"labels.csv: duplicate row {key!r}")
                continue
            seen.add(key)
            score = None
            if has_score and len(row) > 2 and row[2] != "":
                if row[2] not in ("0", "1"):
                    self.violation(
                        SchemaMismatch, f"labels.csv column 'score': bad value {row[2]!r}"
                    )
                    continue
                score = int(row[2])
            rows.append(LabeledRow(end_unit, pid, score))
        return rows


def load_dataset(data_dir: str, mode: str = "strict") -> Dataset:
    """Load the five CSV files of ``data_dir`` into a Dataset.

    ``mode="strict"`` fails on the first violation; ``mode="lenient"`` drops
    unresolvable or malformed records and counts them in ``drop_count``.
    Record order follows file order, so identical files yield identical
    Datasets.
    """
    if mode not in ("strict", "lenient"):
        raise ValueError(f"mode must be 'strict' or 'lenient', got {mode!r}")
    loader = _Loader(data_dir, lenient=(mode == "lenient"))
    problems = loader.load_problems()
    assignments = loader.load_assignments()
    relationships = loader.load_relationships(assignments)
    events = loader.load_events(problems, assignments, relationships)
    rows = loader.load_rows(problems, assignments)
    return Dataset(
        events=events,
        relationships=relationships,
        problems=problems,
        assignments=assignments,
        rows=rows,
        drop_count=loader.dropped,
    )


def validate_dataset(d: Dataset) -> ValidationReport:
    """Summarize a Dataset: entity counts, orphan catalog ids, label balance."""
    students = {a.student_id for a in d.assignments.values()}
    students.update(e.student_id for e in d.events)

    referenced_problems = {e.problem_id for e in d.events}
    referenced_problems.update(r.problem_id for r in d.rows)
    orphan_problems = sorted(set(d.problems) - referenced_problems)

    referenced_assignments = {e.in_unit_assignment_id for e in d.events}
    referenced_assignments.update(e.end_unit_assignment_id for e in d.events)
    referenced_assignments.update(r.end_unit_assignment_id for r in d.rows)
    for end_unit, in_units in d.relationships.items():
        referenced_assignments.add(end_unit)
        referenced_assignments.update(in_units)
    orphan_assignments = sorted(set(d.assignments) - referenced_assignments)

    labeled = [r.score for r in d.rows if r.score is not None]
    balance = sum(labeled) / len(labeled) if labeled else None
    return ValidationReport(
        n_students=len(students),
        n_assignments=len(d.assignments),
        n_problems=len(d.problems),
        n_rows=len(d.rows),
        n_events=len(d.events),
        n_labeled=len(labeled),
        label_balance=balance,
        orphan_problem_ids=orphan_problems,
        orphan_assignment_ids=orphan_assignments,
    )


def student_of_assignment(d: Dataset, assignment_id: str) -> str:
    a = d.assignments.get(assignment_id)
    if a is None:
        raise DanglingReference(f"unknown assignment_id {assignment_id!r}")
    return a.student_id


def iter_labeled(rows: Iterable[LabeledRow]) -> Iterable[LabeledRow]:
    return (r for r in rows if r.score is not None)
