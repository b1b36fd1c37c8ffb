"""Render the per-batch (map) and combining (reduce) prompts.

Templates are plain UTF-8 files with ``str.format`` placeholders. The
shipped defaults live in ``trialsumm/templates``; pass ``template=`` to
override without touching the package.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Sequence

from .batching import Batch
from .text import CITATION_RE, collapse_whitespace
from .trial_model import Trial

DEFAULT_AUDIENCE = "clinical research coordinators"
FENCE = "```"

_REFERENCE_LINE = re.compile(r"^(\d+)\.\s", re.MULTILINE)


class InvariantViolation(ValueError):
    pass


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    """Read a shipped template (``"map_prompt"`` or ``"reduce_prompt"``)."""
    text = (resources.files("trialsumm") / "templates" / f"{name}.txt").read_text(encoding="utf-8")
    return text.rstrip("\n")


def _clean(text: str) -> str:
    # Inline fences would unbalance the prompt's own delimiters.
    return collapse_whitespace(text.replace(FENCE, "'''"))


def format_trial(local_index: int, trial: Trial) -> str:
    return f"{local_index}. {_clean(trial.title)}\n{_clean(trial.brief_summary)}"


@dataclass(frozen=True)
class MapPromptInput:
    device: str
    field_name: str
    batch: Batch | Sequence[Trial]
    budget_words: int
    audience: str = DEFAULT_AUDIENCE

    @property
    def trials(self) -> tuple[Trial, ...]:
        return tuple(self.batch.trials if isinstance(self.batch, Batch) else self.batch)


@dataclass(frozen=True)
class ReducePromptInput:
    device: str
    field_name: str
    intermediate_summaries: Sequence[str]
    reference_list: str
    min_words: int = 150
    max_words: int = 250
    audience: str = DEFAULT_AUDIENCE


def render_map_prompt(inp: MapPromptInput, template: str | None = None) -> str:
    trials = inp.trials
    if not trials:
        raise InvariantViolation("map prompt needs at least one trial")
    if inp.budget_words < 13:
        raise InvariantViolation(f"budget_words must be >= 13, got {inp.budget_words}")
    for trial in trials:
        if not trial.title.strip() or trial.summary_missing:
            raise InvariantViolation(f"{trial.id}: trial needs both a title and a brief summary")
    block = "\n\n".join(format_trial(i, t) for i, t in enumerate(trials, start=1))
    return (template or load_template("map_prompt")).format(
        n_trials=len(trials),
        trial_noun="trial" if len(trials) == 1 else "trials",
        device=inp.device,
        field_name=inp.field_name,
        audience=inp.audience,
        budget_words=inp.budget_words,
        trials=block,
    )


def render_reference_block(indexed_titles: Sequence[tuple[int, str]]) -> str:
    """The reference fence body of the reduce prompt: ``"{global_index}. {title}"`` per line."""
    return "\n".join(f"{i}. {_clean(title)}" for i, title in indexed_titles)


def render_reduce_prompt(inp: ReducePromptInput, template: str | None = None) -> str:
    summaries = [_clean(s) for s in inp.intermediate_summaries]
    if len(summaries) < 2:
        raise InvariantViolation("reduce prompt needs at least two intermediate summaries")
    if any(not s for s in summaries):
        raise InvariantViolation("intermediate summaries must be non-empty")
    listed = {int(m.group(1)) for m in _REFERENCE_LINE.finditer(inp.reference_list)}
    cited = {int(m.group(1)) for s in summaries for m in CITATION_RE.finditer(s)}
    if cited - listed:
        raise InvariantViolation(f"citations missing from the reference list: {sorted(cited - listed)}")
    if inp.min_words >= inp.max_words:
        raise InvariantViolation("min_words must be < max_words")
    return (template or load_template("reduce_prompt")).format(
        device=inp.device,
        field_name=inp.field_name,
        audience=inp.audience,
        summaries="\n\n".join(summaries),
        references=inp.reference_list.replace(FENCE, "'''"),
        min_words=inp.min_words,
        max_words=inp.max_words,
    )
