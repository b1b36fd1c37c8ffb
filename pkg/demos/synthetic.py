"""Small synthetic trial corpus shared by the demo scripts."""

import datetime as dt
import random

from trialsumm import Corpus, MedicalField, Trial, TrialStatus

SUBJECTS = ["This study", "The trial", "A wearable program", "This randomized trial", "The protocol"]
VERBS = ["monitors", "tracks", "improves", "measures", "evaluates"]
TARGETS = ["physical activity", "sleep duration", "resting heart rate", "step counts", "treatment adherence", "fatigue"]
SETTINGS = ["in older adults", "after surgery", "during chemotherapy", "over twelve weeks", "using a Fitbit"]


def make_demo_corpus(n, seed=0, device="Fitbit", field="oncology"):
    rng = random.Random(seed)
    trials = []
    for i in range(n):
        sentences = [
            f"{rng.choice(SUBJECTS)} {rng.choice(VERBS)} {rng.choice(TARGETS)} {rng.choice(SETTINGS)}."
            for _ in range(rng.randint(1, 4))
        ]
        trials.append(
            Trial(
                id=f"NCT{20_000_000 + i:08d}",
                title=f"Wearable monitoring study {i + 1}",
                brief_summary=" ".join(sentences),
                status=rng.choice([TrialStatus.COMPLETED, TrialStatus.RECRUITING, TrialStatus.WITHDRAWN]),
                enrollment=rng.choice([12, 40, 60, 120, 300]),
                start_date=dt.date(2021, rng.randint(1, 12), 1),
                completion_date=dt.date(2023, rng.randint(1, 12), 1),
            )
        )
    return Corpus(device, MedicalField(field), None, tuple(trials))
