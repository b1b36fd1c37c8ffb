"""The batch -> summarize -> renumber -> combine cascade."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .batching import Batch, BudgetPolicy, estimate_tokens, make_batches, word_budget
from .cache import ResponseCache, cached_complete, sha256_text
from .citations import (
    Citation,
    CitationMap,
    extract_citations,
    remap_or_strip,
    render_reference_list,
    strip_indices,
    validate,
)
from .ingest import trial_to_dict
from .llm_backend import Backend, CompletionRequest
from .prompting import (
    DEFAULT_AUDIENCE,
    MapPromptInput,
    ReducePromptInput,
    render_map_prompt,
    render_reduce_prompt,
    render_reference_block,
)
from .text import word_count
from .trial_model import Corpus, Trial

logger = logging.getLogger(__name__)


class CascadeDepthExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    policy: BudgetPolicy = BudgetPolicy()
    reduce_fan_in: int | None = None
    max_cascade_depth: int = 4
    concurrency_limit: int = 4
    cache_dir: str | None = None
    temperature: float = 0.0
    audience: str = DEFAULT_AUDIENCE
    reprompt_on_word_range: bool = False

    def __post_init__(self) -> None:
        if self.max_cascade_depth < 1:
            raise ValueError("max_cascade_depth must be >= 1")
        if self.concurrency_limit < 1:
            raise ValueError("concurrency_limit must be >= 1")
        if self.reduce_fan_in is not None and self.reduce_fan_in < 2:
            raise ValueError("reduce_fan_in must be >= 2")

    def snapshot(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class SummaryArtifact:
    text: str
    level: int
    source_batches: tuple[int, ...]
    citations: tuple[Citation, ...]
    word_count: int

    @classmethod
    def from_text(cls, text: str, level: int, source_batches: Sequence[int]) -> SummaryArtifact:
        return cls(text, level, tuple(source_batches), tuple(extract_citations(text)), word_count(text))

    def to_dict(self) -> dict[str, Any]:
        return {
            "text": self.text,
            "level": self.level,
            "source_batches": list(self.source_batches),
            "citations": sorted({c.index for c in self.citations}),
            "word_count": self.word_count,
        }


@dataclass
class CallRecord:
    prompt_hash: str
    response_hash: str
    backend_id: str
    cache_hit: bool
    stage: str
    level: int


@dataclass
class RunRecord:
    corpus_fingerprint: str
    config: dict[str, Any]
    model_id: str
    calls: list[CallRecord] = field(default_factory=list)
    llm_call_count: int = 0
    hallucination_events: list[dict[str, Any]] = field(default_factory=list)
    artifacts: list[SummaryArtifact] = field(default_factory=list)
    batch_sizes: list[int] = field(default_factory=list)
    truncated_trials: list[str] = field(default_factory=list)
    word_range_deviation: dict[str, int] | None = None
    final: SummaryArtifact | None = None
    reference_list: str = ""
    corpus_size: int = 0

    @property
    def coverage_fraction(self) -> float:
        assert self.final is not None
        return validate(self.final.text, self.corpus_size).coverage_fraction

    def document(self) -> str:
        """The final summary paragraph followed by its reference list."""
        assert self.final is not None
        parts = [self.final.text]
        if self.reference_list:
            parts.append("References:\n" + self.reference_list)
        return "\n\n".join(parts) + "\n"

    def to_dict(self) -> dict[str, Any]:
        assert self.final is not None
        return {
            "corpus_fingerprint": self.corpus_fingerprint,
            "corpus_size": self.corpus_size,
            "config": self.config,
            "model_id": self.model_id,
            "llm_call_count": self.llm_call_count,
            "calls": [dataclasses.asdict(c) for c in self.calls],
            "batch_sizes": self.batch_sizes,
            "truncated_trials": self.truncated_trials,
            "hallucination_events": self.hallucination_events,
            "word_range_deviation": self.word_range_deviation,
            "levels": [a.to_dict() for a in self.artifacts],
            "final": self.final.to_dict(),
            "text": self.final.text,
            "citations": sorted({c.index for c in self.final.citations}),
            "coverage": self.coverage_fraction,
            "reference_list": self.reference_list,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def corpus_fingerprint(corpus: Corpus) -> str:
    payload = {
        "device": corpus.device,
        "field": corpus.field.name,
        "recency": corpus.recency.value if corpus.recency else None,
        "trials": [trial_to_dict(t) for t in corpus.trials],
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()


def expected_call_count(n_trials: int, config: PipelineConfig = PipelineConfig()) -> int:
    """LLM calls for ``n_trials`` at a single combine level, assuming no oversize re-splitting."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    batches = math.ceil(n_trials / config.policy.batch_size)
    return batches + (1 if batches > 1 else 0)


class _Runner:
    def __init__(self, corpus: Corpus, config: PipelineConfig, backend: Backend, cache: ResponseCache | None):
        self.corpus = corpus
        self.config = config
        self.policy = config.policy
        self.backend = backend
        self.cache = cache
        self._lock = threading.Lock()
        self.record = RunRecord(
            corpus_fingerprint=corpus_fingerprint(corpus),
            config=config.snapshot(),
            model_id=backend.model_id,
            corpus_size=len(corpus),
        )

    # -- calls -----------------------------------------------------------

    def _complete(self, prompt: str, max_words: int, stage: str, level: int) -> tuple[str, CallRecord]:
        request = CompletionRequest(
            model_id=self.backend.model_id,
            prompt=prompt,
            temperature=self.config.temperature,
            max_output_tokens=2 * max_words,
        )
        response, hit = cached_complete(request, self.backend, self.cache)
        call = CallRecord(sha256_text(prompt), sha256_text(response.text), response.backend_id, hit, stage, level)
        if not hit:
            with self._lock:
                self.record.llm_call_count += 1
        return response.text, call

    # -- map -------------------------------------------------------------

    def _map_prompt(self, trials: Sequence[Trial]) -> str:
        return render_map_prompt(
            MapPromptInput(
                device=self.corpus.device,
                field_name=self.corpus.field.display_name,
                batch=trials,
                budget_words=word_budget(trials, self.policy),
                audience=self.config.audience,
            )
        )

    def _map_one(self, batch: Batch) -> tuple[SummaryArtifact, CallRecord, list[dict]]:
        budget = word_budget(batch, self.policy)
        text, call = self._complete(self._map_prompt(batch.trials), budget, "map", 0)
        remapped, dropped = remap_or_strip(text, CitationMap.for_batch(batch))
        events = [
            {"stage": "map", "level": 0, "batch": batch.ordinal, "index": c.index, "reason": "local index outside batch"}
            for c in dropped
        ]
        return SummaryArtifact.from_text(remapped, 0, [batch.ordinal]), call, events

    # -- reduce ----------------------------------------------------------

    def _reduce_prompt(self, group: Sequence[SummaryArtifact]) -> str:
        cited = sorted({c.index for a in group for c in a.citations})
        refs = render_reference_block([(i, self.corpus.trial_at(i).title) for i in cited])
        return render_reduce_prompt(
            ReducePromptInput(
                device=self.corpus.device,
                field_name=self.corpus.field.display_name,
                intermediate_summaries=[a.text for a in group],
                reference_list=refs,
                min_words=self.policy.combine_min_words,
                max_words=self.policy.combine_max_words,
                audience=self.config.audience,
            )
        )

    def _fits(self, group: Sequence[SummaryArtifact]) -> bool:
        return estimate_tokens(self._reduce_prompt(group)) <= self.policy.token_limit

    def _group(self, artifacts: list[SummaryArtifact]) -> list[list[SummaryArtifact]]:
        """Greedy, order-preserving grouping so that each group's prompt fits."""
        fan_in = self.config.reduce_fan_in
        groups: list[list[SummaryArtifact]] = []
        current: list[SummaryArtifact] = []
        for artifact in artifacts:
            candidate = current + [artifact]
            too_many = fan_in is not None and len(candidate) > fan_in
            if current and (too_many or (len(candidate) >= 2 and not self._fits(candidate))):
                groups.append(current)
                current = [artifact]
            else:
                current = candidate
        groups.append(current)
        return groups

    def _strip_out_of_range(self, text: str, stage: str, level: int) -> str:
        report = validate(text, len(self.corpus))
        if report.out_of_range:
            self.record.hallucination_events.extend(
                {"stage": stage, "level": level, "index": c.index, "reason": "index outside corpus"}
                for c in report.out_of_range
            )
            text = strip_indices(text, {c.index for c in report.out_of_range})
        return text

    def _reduce_one(self, group: list[SummaryArtifact], level: int) -> SummaryArtifact:
        lo, hi = self.policy.combine_min_words, self.policy.combine_max_words
        prompt = self._reduce_prompt(group)
        text, call = self._complete(prompt, hi, "reduce", level)
        self.record.calls.append(call)
        if self.config.reprompt_on_word_range and not lo <= word_count(text) <= hi:
            nudge = f"\n\nYour previous answer had {word_count(text)} words. Stay within {lo}-{hi} words."
            text, call = self._complete(prompt + nudge, hi, "reduce-retry", level)
            self.record.calls.append(call)
        text = self._strip_out_of_range(text, "reduce", level)
        sources = tuple(b for a in group for b in a.source_batches)
        return SummaryArtifact.from_text(text, level, sources)

    # -- driver ----------------------------------------------------------

    def run(self) -> RunRecord:
        batches = make_batches(self.corpus, self.policy, render=self._map_prompt)
        self.record.batch_sizes = [len(b) for b in batches]
        self.record.truncated_trials = [i for b in batches for i in b.truncated]

        with ThreadPoolExecutor(max_workers=self.config.concurrency_limit) as pool:
            mapped = list(pool.map(self._map_one, batches))
        artifacts = []
        for artifact, call, events in mapped:
            artifacts.append(artifact)
            self.record.calls.append(call)
            self.record.hallucination_events.extend(events)
        self.record.artifacts.extend(artifacts)

        level = 0
        while len(artifacts) > 1:
            level += 1
            if level > self.config.max_cascade_depth:
                raise CascadeDepthExceeded(
                    f"{len(artifacts)} summaries remain after {self.config.max_cascade_depth} combine levels"
                )
            groups = self._group(artifacts)
            if all(len(g) == 1 for g in groups):
                raise CascadeDepthExceeded("no two intermediate summaries fit in one combine prompt")
            artifacts = [g[0] if len(g) == 1 else self._reduce_one(g, level) for g in groups]
            self.record.artifacts.extend(a for a in artifacts if a.level == level)

        final_text = self._strip_out_of_range(artifacts[0].text, "final", level)
        final = SummaryArtifact.from_text(final_text, artifacts[0].level, artifacts[0].source_batches)
        self.record.final = final
        cited = {c.index for c in final.citations}
        self.record.reference_list = render_reference_list(cited, self.corpus)

        lo, hi = self.policy.combine_min_words, self.policy.combine_max_words
        if level > 0 and not lo <= final.word_count <= hi:
            self.record.word_range_deviation = {"words": final.word_count, "min": lo, "max": hi}
            logger.warning("final summary has %d words, outside %d-%d", final.word_count, lo, hi)
        return self.record


def summarize_corpus(
    corpus: Corpus,
    config: PipelineConfig = PipelineConfig(),
    backend: Backend | None = None,
    cache: ResponseCache | None = None,
) -> RunRecord:
    """Run the full cascade over ``corpus``.

    ``cache`` defaults to a directory cache at ``config.cache_dir`` when set.
    """
    if backend is None:
        raise ValueError("a completion backend is required")
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    if cache is None and config.cache_dir is not None:
        cache = ResponseCache(Path(config.cache_dir))
    return _Runner(corpus, config, backend, cache).run()


def replay(corpus: Corpus, config: PipelineConfig, model_id: str, cache: ResponseCache | None = None) -> RunRecord:
    """Re-run from cached responses only; any cache miss raises :class:`~trialsumm.cache.CacheMiss`."""
    from .cache import CacheOnlyBackend

    if cache is None:
        if config.cache_dir is None:
            raise ValueError("replay needs a cache")
        cache = ResponseCache(Path(config.cache_dir))
    return _Runner(corpus, config, CacheOnlyBackend(model_id), cache).run()
