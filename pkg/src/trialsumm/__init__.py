"""Cascading map/reduce summarization of clinical-trial registry records."""

from .batching import Batch, BudgetPolicy, estimate_tokens, make_batches, word_budget
from .citations import (
    Citation,
    CitationMap,
    ValidationReport,
    extract_citations,
    remap_citations,
    render_reference_list,
    validate,
)
from .llm_backend import CompletionRequest, CompletionResponse, HttpBackend, MockBackend, mock_complete
from .pipeline import PipelineConfig, RunRecord, SummaryArtifact, expected_call_count, replay, summarize_corpus
from .trial_model import (
    Corpus,
    MedicalField,
    RecencyClass,
    Trial,
    TrialStatus,
    classify_recency,
    filter_trials,
)

__version__ = "0.1.0"
