"""Trial and corpus types, plus the inclusion and recency rules."""

from __future__ import annotations

import datetime as dt
import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

MIN_ENROLLMENT = 50
COMPLETED_WINDOW_YEARS = 5
NEW_WINDOW_YEARS = 2


class MissingDate(ValueError):
    """The date needed to classify a trial's recency is absent."""


class TrialStatus(str, enum.Enum):
    RECRUITING = "recruiting"
    ACTIVE = "active"
    COMPLETED = "completed"
    WITHDRAWN = "withdrawn"
    OTHER = "other"


class RecencyClass(str, enum.Enum):
    COMPLETED_WITHIN_5Y = "completed_within_5y"
    NEW_WITHIN_2Y = "new_within_2y"
    OUT_OF_WINDOW = "out_of_window"


KNOWN_FIELDS = (
    "somnology",
    "gynecology",
    "obstetrics",
    "cardiology",
    "general_physiology",
    "endocrinology",
    "bariatrics",
    "psychiatry",
    "oncology",
    "gastroenterology",
    "pulmonology",
    "chronic_pain",
    "nephrology",
    "other",
)

_FIELD_ALIASES = {
    "chronic_pain_diseases": "chronic_pain",
    "chronic_pain_disease": "chronic_pain",
    "chronic_diseases": "chronic_pain",
    "physiology": "general_physiology",
}


def _snake(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", name.strip().lower()).strip("_")


@dataclass(frozen=True, order=True)
class MedicalField:
    """A medical field label, normalized to lowercase snake form.

    Names outside the built-in list are kept as user-defined extensions
    rather than being folded into ``other``.
    """

    name: str

    def __post_init__(self) -> None:
        normalized = _snake(self.name)
        if not normalized:
            raise ValueError("medical field name is empty")
        object.__setattr__(self, "name", _FIELD_ALIASES.get(normalized, normalized))

    @property
    def is_extension(self) -> bool:
        return self.name not in KNOWN_FIELDS

    @property
    def display_name(self) -> str:
        return self.name.replace("_", " ")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Trial:
    id: str
    title: str
    brief_summary: str
    status: TrialStatus
    enrollment: int | None
    start_date: dt.date | None = None
    completion_date: dt.date | None = None
    conditions: tuple[str, ...] = ()
    field_labels: tuple[MedicalField, ...] = ()
    raw_status: str | None = None

    def __post_init__(self) -> None:
        if not self.id or not self.id.strip():
            raise ValueError("trial id must be non-empty")
        if self.enrollment is not None and self.enrollment < 0:
            raise ValueError(f"{self.id}: enrollment must be >= 0, got {self.enrollment}")
        object.__setattr__(self, "status", TrialStatus(self.status))
        object.__setattr__(self, "conditions", tuple(self.conditions))
        object.__setattr__(
            self,
            "field_labels",
            tuple(f if isinstance(f, MedicalField) else MedicalField(f) for f in self.field_labels),
        )

    @property
    def summary_missing(self) -> bool:
        return not self.brief_summary.strip()


@dataclass(frozen=True)
class Corpus:
    """An ordered trial set; position i (1-based) is the trial's global reference index."""

    device: str
    field: MedicalField
    recency: RecencyClass | None
    trials: tuple[Trial, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "trials", tuple(self.trials))
        if not isinstance(self.field, MedicalField):
            object.__setattr__(self, "field", MedicalField(self.field))
        if self.recency is not None:
            object.__setattr__(self, "recency", RecencyClass(self.recency))
        seen: set[str] = set()
        for trial in self.trials:
            if trial.id in seen:
                raise ValueError(f"duplicate trial id in corpus: {trial.id}")
            seen.add(trial.id)

    def __len__(self) -> int:
        return len(self.trials)

    def trial_at(self, index: int) -> Trial:
        """Return the trial with 1-based global reference ``index``."""
        if not 1 <= index <= len(self.trials):
            raise IndexError(f"reference index {index} outside [1, {len(self.trials)}]")
        return self.trials[index - 1]


def years_before(day: dt.date, years: int) -> dt.date:
    """Same month/day ``years`` earlier; Feb 29 clamps to Feb 28."""
    try:
        return day.replace(year=day.year - years)
    except ValueError:
        return day.replace(year=day.year - years, day=28)


def exclusion_reason(trial: Trial) -> str | None:
    """Name of the first inclusion rule ``trial`` fails, or None if it passes."""
    if trial.status is TrialStatus.WITHDRAWN:
        return "withdrawn"
    if trial.enrollment is None or trial.enrollment < MIN_ENROLLMENT:
        return "enrollment_below_50"
    if trial.summary_missing:
        return "summary_missing"
    return None


def filter_trials(trials: Iterable[Trial], reference_date: dt.date | None = None) -> list[Trial]:
    """Drop withdrawn trials, trials enrolling fewer than 50 and trials without a summary.

    ``reference_date`` is accepted for call-site symmetry with
    :func:`classify_recency`; none of the rules depend on it.
    """
    return [t for t in trials if exclusion_reason(t) is None]


def classify_recency(trial: Trial, reference_date: dt.date) -> RecencyClass:
    if trial.status is TrialStatus.COMPLETED:
        if trial.completion_date is None:
            raise MissingDate(f"{trial.id}: completed trial has no completion date")
        lo = years_before(reference_date, COMPLETED_WINDOW_YEARS)
        if lo <= trial.completion_date <= reference_date:
            return RecencyClass.COMPLETED_WITHIN_5Y
        return RecencyClass.OUT_OF_WINDOW
    if trial.start_date is None:
        raise MissingDate(f"{trial.id}: trial has no start date")
    lo = years_before(reference_date, NEW_WINDOW_YEARS)
    if lo <= trial.start_date <= reference_date:
        return RecencyClass.NEW_WITHIN_2Y
    return RecencyClass.OUT_OF_WINDOW


def select_recency(
    trials: Sequence[Trial], recency: RecencyClass, reference_date: dt.date
) -> list[Trial]:
    """Trials whose recency class is ``recency``; trials missing the needed date are dropped."""
    kept = []
    for trial in trials:
        try:
            if classify_recency(trial, reference_date) is recency:
                kept.append(trial)
        except MissingDate:
            continue
    return kept
