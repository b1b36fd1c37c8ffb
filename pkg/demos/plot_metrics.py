"""
Evaluation metrics
==================

Readability is scored with SMOG, the source and summary readability are
compared with Welch's t-test, reference inclusion is fitted against corpus
size with least squares, and summaries are compared with ROUGE-L F1.
"""

# %%
# SMOG on a single paragraph
# --------------------------
from synthetic import make_demo_corpus

from trialsumm import MockBackend, PipelineConfig, summarize_corpus
from trialsumm.metrics import (
    build_metrics_report,
    count_syllables,
    rouge_l_f1_text,
    smog_text,
    text_stats,
    welch_t_test,
)

paragraph = (
    "Fitbit devices are used to monitor physical activity in oncology trials [1]. "
    "Continuous measurement supports personalized rehabilitation [2]."
)
print(text_stats(paragraph), round(smog_text(paragraph), 2))
print({w: count_syllables(w) for w in ["rehabilitation", "oncology", "trials", "table"]})

# %%
# Welch's t-test from summary statistics
# --------------------------------------
# Mean SMOG of trial descriptions against mean SMOG of summaries.
result = welch_t_test(19.32, 1.220, 27, 18.49, 2.148, 27)
print(f"t={result.t_statistic:.3f} df={result.degrees_of_freedom:.1f} p={result.p_value_two_tailed:.4f}")

# %%
# A report over several runs
# --------------------------
# Each run contributes its word count and SMOG plus utilization; with at least
# two corpus sizes the report also fits unique references against size.
runs = []
sources = []
for size, seed in [(16, 1), (39, 2), (60, 3), (85, 4)]:
    corpus = make_demo_corpus(size, seed=seed)
    runs.append((summarize_corpus(corpus, PipelineConfig(), MockBackend()).final.text, size))
    sources.extend(t.brief_summary for t in corpus.trials)
report = build_metrics_report(runs, sources)
print(report["word_count"])
print(report["reference_inclusion_fit"])
print(report["readability_t_test"]["p_value_two_tailed"])

# %%
# ROUGE-L
# -------
print(rouge_l_f1_text("the tracker measured daily steps", "the tracker counted steps daily"))
