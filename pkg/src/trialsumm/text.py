"""Shared tokenization helpers: citation markers, word and sentence splitting."""

from __future__ import annotations

import re

CITATION_RE = re.compile(r"\[(\d+)\]")

# Lowercased, without the trailing period.
ABBREVIATIONS = frozenset(
    {
        "approx", "ca", "cf", "dr", "e.g", "eg", "et al", "etc", "fig", "i.e",
        "ie", "inc", "jr", "ltd", "mr", "mrs", "ms", "prof", "sr", "st",
        "u.s", "u.k", "vol", "vs",
    }
)

_SENTENCE_END = re.compile(r"[.!?]+(?=\s|$)")
_ALNUM = re.compile(r"[A-Za-z0-9]")


def collapse_whitespace(text: str) -> str:
    return " ".join(text.split())


def strip_citations(text: str) -> str:
    """Remove every ``[n]`` marker and collapse the whitespace left behind."""
    return collapse_whitespace(CITATION_RE.sub(" ", text))


def words(text: str) -> list[str]:
    """Whitespace tokens of ``text`` that contain a letter or digit.

    Citation markers count as words ("[31]," is one token), which is how
    reported summary lengths such as "201 words" were measured. Bare
    punctuation tokens do not count.
    """
    return [tok for tok in text.split() if _ALNUM.search(tok)]


def prose_words(text: str) -> list[str]:
    """Like :func:`words`, with citation markers removed first."""
    return words(strip_citations(text))


def word_count(text: str) -> int:
    return len(words(text))


def _is_abbreviation(prefix: str) -> bool:
    tail = prefix.rstrip(".").lower()
    for abbr in ABBREVIATIONS:
        if tail.endswith(abbr):
            start = len(tail) - len(abbr)
            if start == 0 or not tail[start - 1].isalpha():
                return True
    return False


def split_sentences(text: str) -> list[str]:
    """Split on ``.``/``!``/``?`` followed by whitespace or end of text.

    A period closing a known abbreviation does not end a sentence.
    """
    text = collapse_whitespace(text)
    if not text:
        return []
    sentences = []
    start = 0
    for match in _SENTENCE_END.finditer(text):
        end = match.end()
        if match.group() == "." and _is_abbreviation(text[start:match.start()]):
            continue
        piece = text[start:end].strip()
        if piece:
            sentences.append(piece)
        start = end
    rest = text[start:].strip()
    if rest:
        sentences.append(rest)
    return sentences


def first_sentence(text: str) -> str:
    sentences = split_sentences(text)
    return sentences[0] if sentences else ""
