"""Fixed-size batching with token estimates and per-batch word budgets."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .text import split_sentences
from .trial_model import Corpus, Trial


class EmptyCorpus(ValueError):
    pass


@dataclass(frozen=True)
class BudgetPolicy:
    batch_size: int = 15
    words_per_trial: int = 13
    full_batch_words: int = 200
    combine_min_words: int = 150
    combine_max_words: int = 250
    token_limit: int = 4096

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.combine_min_words >= self.combine_max_words:
            raise ValueError("combine_min_words must be < combine_max_words")
        if self.words_per_trial * self.batch_size > self.full_batch_words + 5:
            raise ValueError(
                f"{self.words_per_trial} words x {self.batch_size} trials overshoots "
                f"the full-batch budget of {self.full_batch_words}"
            )


@dataclass(frozen=True)
class Batch:
    """A contiguous run of corpus trials.

    ``global_offset`` is the 0-based corpus position of the first trial, so
    local citation ``[k]`` maps to global reference ``global_offset + k``.
    ``truncated`` lists ids whose description was shortened to fit the
    token limit.
    """

    ordinal: int
    trials: tuple[Trial, ...]
    global_offset: int
    truncated: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.trials)


def estimate_tokens(text: str) -> int:
    """Roughly four characters per token."""
    return math.ceil(len(text) / 4)


def word_budget(batch: Batch | Sequence[Trial], policy: BudgetPolicy = BudgetPolicy()) -> int:
    size = len(batch)
    if size < 1:
        raise ValueError("batch is empty")
    if size >= policy.batch_size:
        return policy.full_batch_words
    return policy.words_per_trial * size


def _truncate_to_fit(trial: Trial, fits: Callable[[Sequence[Trial]], bool]) -> Trial:
    """Shorten one trial's description until its prompt fits.

    Whole trailing sentences go first; if even the first sentence is too
    long, words are dropped from its end.
    """
    sentences = split_sentences(trial.brief_summary)
    for keep in range(len(sentences) - 1, 0, -1):
        candidate = dataclasses.replace(trial, brief_summary=" ".join(sentences[:keep]))
        if fits([candidate]):
            return candidate
    tokens = (sentences[0] if sentences else trial.brief_summary).split()
    lo, hi = 1, len(tokens)
    best = None
    while lo <= hi:
        mid = (lo + hi) // 2
        candidate = dataclasses.replace(trial, brief_summary=" ".join(tokens[:mid]))
        if fits([candidate]):
            best, lo = candidate, mid + 1
        else:
            hi = mid - 1
    if best is None:
        raise ValueError(f"{trial.id}: prompt exceeds the token limit even with a one-word description")
    return best


def make_batches(
    corpus: Corpus | Sequence[Trial],
    policy: BudgetPolicy = BudgetPolicy(),
    render: Callable[[Sequence[Trial]], str] | None = None,
) -> list[Batch]:
    """Split the corpus into consecutive batches of ``policy.batch_size``.

    With ``render`` (trials -> map prompt text), a batch whose prompt would
    exceed ``policy.token_limit`` is halved recursively (15 -> 8 + 7 -> ...)
    and a lone oversized trial has its description truncated.
    """
    trials = list(corpus.trials if isinstance(corpus, Corpus) else corpus)
    if not trials:
        raise EmptyCorpus("cannot batch an empty corpus")

    def fits(chunk: Sequence[Trial]) -> bool:
        return render is None or estimate_tokens(render(chunk)) <= policy.token_limit

    def split(chunk: list[Trial]) -> list[tuple[list[Trial], tuple[str, ...]]]:
        if fits(chunk):
            return [(chunk, ())]
        if len(chunk) == 1:
            return [([_truncate_to_fit(chunk[0], fits)], (chunk[0].id,))]
        half = math.ceil(len(chunk) / 2)
        return split(chunk[:half]) + split(chunk[half:])

    batches: list[Batch] = []
    offset = 0
    for start in range(0, len(trials), policy.batch_size):
        for chunk, truncated in split(trials[start : start + policy.batch_size]):
            batches.append(Batch(len(batches), tuple(chunk), offset, truncated))
            offset += len(chunk)
    return batches
