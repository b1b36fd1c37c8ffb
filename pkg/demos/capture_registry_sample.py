"""
Capturing a registry sample
===========================

Fetches Fitbit trials from ClinicalTrials.gov, applies the inclusion rules
and writes them as a corpus file. Saved to
``tests/fixtures/live_sample.jsonl`` it becomes the description sample used
by the readability band check in the acceptance suite. Needs network access.
"""

# %%
import sys
from pathlib import Path

from trialsumm import Corpus, MedicalField
from trialsumm.ingest import Query, RegistryClient, save_corpus
from trialsumm.metrics import smog_text, summarize_distribution
from trialsumm.trial_model import filter_trials

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent.parent / "tests" / "fixtures" / "live_sample.jsonl"

client = RegistryClient()
try:
    trials = filter_trials(client.fetch_all(Query("Fitbit", page_size=100), max_records=200))
finally:
    client.close()
save_corpus(Corpus("Fitbit", MedicalField("other"), None, tuple(trials)), out)
print(f"wrote {len(trials)} trials to {out}")

# %%
# Mean SMOG of the descriptions, the number the band check looks at.
print(summarize_distribution([smog_text(t.brief_summary) for t in trials]))
