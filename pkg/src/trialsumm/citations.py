"""Bracketed citations: parsing, plus batch-to-corpus renumbering with validation."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .batching import Batch
from .text import CITATION_RE
from .trial_model import Corpus


class UnmappedIndex(KeyError):
    def __init__(self, local: int, span: tuple[int, int]) -> None:
        super().__init__(f"citation [{local}] at {span} has no global mapping")
        self.local = local
        self.span = span


class InvalidIndex(IndexError):
    pass


@dataclass(frozen=True)
class Citation:
    index: int
    span: tuple[int, int]


@dataclass(frozen=True)
class CitationMap:
    """Injective local -> global index mapping for one batch."""

    mapping: Mapping[int, int]

    def __post_init__(self) -> None:
        if len(set(self.mapping.values())) != len(self.mapping):
            raise ValueError("citation map must be injective")

    @classmethod
    def for_batch(cls, batch: Batch) -> CitationMap:
        return cls({k: batch.global_offset + k for k in range(1, len(batch) + 1)})

    def __contains__(self, local: int) -> bool:
        return local in self.mapping

    def __getitem__(self, local: int) -> int:
        return self.mapping[local]


@dataclass(frozen=True)
class ValidationReport:
    total_citations: int
    unique_indices: frozenset[int]
    out_of_range: list[Citation] = field(default_factory=list)
    coverage_fraction: float = 0.0


def extract_citations(text: str) -> list[Citation]:
    """Every ``[n]`` token in ``text``, in order of appearance."""
    return [Citation(int(m.group(1)), m.span()) for m in CITATION_RE.finditer(text)]


def unique_indices(text: str) -> set[int]:
    return {c.index for c in extract_citations(text)}


def remap_citations(text: str, mapping: CitationMap) -> str:
    """Replace each local ``[k]`` with its global ``[mapping[k]]``.

    Raises :class:`UnmappedIndex` on the first index outside the map.
    """

    def sub(match: re.Match) -> str:
        local = int(match.group(1))
        if local not in mapping:
            raise UnmappedIndex(local, match.span())
        return f"[{mapping[local]}]"

    return CITATION_RE.sub(sub, text)


_STRIP_TOKEN = re.compile(r" ?\[(\d+)\]")


def strip_indices(text: str, drop: Iterable[int]) -> str:
    """Delete the citation tokens whose index is in ``drop`` (with one leading space)."""
    drop = set(drop)
    if not drop:
        return text
    return _STRIP_TOKEN.sub(lambda m: "" if int(m.group(1)) in drop else m.group(0), text)


def remap_or_strip(text: str, mapping: CitationMap) -> tuple[str, list[Citation]]:
    """Like :func:`remap_citations`, but unmappable citations are removed.

    Returns the remapped text and the citations that were stripped (spans
    refer to the input text).
    """
    dropped = [c for c in extract_citations(text) if c.index not in mapping]
    cleaned = strip_indices(text, {c.index for c in dropped})
    return remap_citations(cleaned, mapping), dropped


def validate(text: str, corpus_size: int) -> ValidationReport:
    if corpus_size < 1:
        raise ValueError("corpus_size must be >= 1")
    citations = extract_citations(text)
    bad = [c for c in citations if not 1 <= c.index <= corpus_size]
    valid = frozenset(c.index for c in citations if 1 <= c.index <= corpus_size)
    return ValidationReport(
        total_citations=len(citations),
        unique_indices=frozenset(c.index for c in citations),
        out_of_range=bad,
        coverage_fraction=len(valid) / corpus_size,
    )


def render_reference_list(indices: Iterable[int], corpus: Corpus) -> str:
    """One ``[i] {title} ({registry id})`` line per index, ascending."""
    lines = []
    for i in sorted(set(indices)):
        if not 1 <= i <= len(corpus):
            raise InvalidIndex(f"reference [{i}] outside corpus of {len(corpus)} trials")
        trial = corpus.trial_at(i)
        lines.append(f"[{i}] {trial.title} ({trial.id})")
    return "\n".join(lines)
