from __future__ import annotations

import datetime as dt
import random

import pytest

from trialsumm.trial_model import Corpus, MedicalField, RecencyClass, Trial, TrialStatus

_NOUNS = [
    "participants", "activity", "sleep", "heart rate", "step counts", "adherence", "weight",
    "blood pressure", "glucose", "fatigue", "symptoms", "recovery", "quality of life",
]
_VERBS = ["monitors", "tracks", "improves", "measures", "compares", "evaluates", "encourages"]
_SUBJECTS = [
    "This study", "The trial", "The intervention", "A wearable program", "The research team",
    "This randomized trial", "The protocol",
]


def synthetic_sentence(rng: random.Random) -> str:
    extra = " and ".join(rng.sample(_NOUNS, rng.randint(1, 3)))
    tail = rng.choice(["", " over twelve weeks", " in older adults", " after surgery", " using a Fitbit"])
    return f"{rng.choice(_SUBJECTS)} {rng.choice(_VERBS)} {extra}{tail}."


def synthetic_trial(i: int, rng: random.Random) -> Trial:
    summary = " ".join(synthetic_sentence(rng) for _ in range(rng.randint(1, 4)))
    return Trial(
        id=f"NCT{10_000_000 + i:08d}",
        title=f"Synthetic wearable study number {i}",
        brief_summary=summary,
        status=TrialStatus.COMPLETED,
        enrollment=50 + rng.randint(0, 400),
        start_date=dt.date(2019, 1, 1),
        completion_date=dt.date(2021, 6, 1),
        field_labels=(MedicalField("general_physiology"),),
    )


def make_corpus(n: int, seed: int = 0) -> Corpus:
    rng = random.Random(seed)
    return Corpus(
        device="Fitbit",
        field=MedicalField("general_physiology"),
        recency=RecencyClass.COMPLETED_WITHIN_5Y,
        trials=tuple(synthetic_trial(i, rng) for i in range(1, n + 1)),
    )


@pytest.fixture
def corpus_factory():
    return make_corpus


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for report in terminalreporter.stats.get(outcome, []):
            if report.when != "call":
                continue
            label = dict(report.user_properties).get("criterion")
            if label:
                lines.append((label, "PASS" if outcome == "passed" else "FAIL"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for label, verdict in sorted(lines, key=lambda x: int(x[0].split()[0])):
            terminalreporter.write_line(f"{verdict}  criterion {label}")
