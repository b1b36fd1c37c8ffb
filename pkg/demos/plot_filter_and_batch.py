"""
Filtering trials and cutting them into batches
==============================================

Registry searches return everything that mentions a device. Before any
summarization we drop withdrawn trials, trials enrolling fewer than 50
people and trials without a description. The survivors are then cut into
batches of 15, and each batch gets a word budget for its summary.
"""

# %%
# Build a toy corpus and apply the inclusion rules
# ------------------------------------------------
import dataclasses
import datetime as dt
from collections import Counter

from synthetic import make_demo_corpus

from trialsumm import BudgetPolicy, estimate_tokens, make_batches, word_budget
from trialsumm.trial_model import classify_recency, exclusion_reason, filter_trials

raw = make_demo_corpus(120, seed=1)
reasons = Counter(exclusion_reason(t) or "kept" for t in raw.trials)
print(reasons)

kept = filter_trials(raw.trials)
corpus = dataclasses.replace(raw, trials=tuple(kept))
print(f"{len(raw.trials)} fetched, {len(corpus)} kept")

# %%
# Recency classes
# ---------------
# Completed trials count when they finished in the last five years; the
# rest count as "new" when they started in the last two.
ref = dt.date(2024, 6, 1)
print(Counter(classify_recency(t, ref).value for t in corpus.trials))

# %%
# Batches and budgets
# -------------------
# A full batch of 15 gets 200 words; shorter batches get 13 words per trial.
policy = BudgetPolicy()
for batch in make_batches(corpus, policy):
    text = "\n\n".join(f"{t.title}\n{t.brief_summary}" for t in batch.trials)
    print(
        f"batch {batch.ordinal}: trials {batch.global_offset + 1}-{batch.global_offset + len(batch)}, "
        f"budget {word_budget(batch, policy)} words, ~{estimate_tokens(text)} tokens of payload"
    )
