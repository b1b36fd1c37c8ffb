"""Evaluation metrics: SMOG readability, Welch t-test, OLS fit, ROUGE-L, summary statistics."""

from __future__ import annotations

import math
import re
import string
from dataclasses import asdict, dataclass
from typing import Any, Sequence

import numpy as np

from .text import prose_words, split_sentences

SMOG_INTERCEPT = 3.1291
SMOG_SLOPE = 1.0430

_VOWEL_RUNS = re.compile(r"[aeiouy]+")
_NON_LETTERS = re.compile(r"[^a-z]")


class EmptyText(ValueError):
    pass


class EmptyInput(ValueError):
    pass


class DegenerateInput(ValueError):
    pass


@dataclass(frozen=True)
class TextStats:
    sentences: int
    words: int
    polysyllables: int


@dataclass(frozen=True)
class TTestResult:
    mean1: float
    sd1: float
    n1: int
    mean2: float
    sd2: float
    n2: int
    t_statistic: float
    degrees_of_freedom: float
    p_value_two_tailed: float


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    std: float
    n: int
    min: float
    max: float
    degenerate: bool = False


# -- readability -------------------------------------------------------------


def count_syllables(word: str) -> int:
    """Vowel-group estimate.

    Each run of ``aeiouy`` counts once; a final silent ``e`` is dropped
    unless that would leave no syllables. Every word has at least one.
    """
    w = _NON_LETTERS.sub("", word.lower())
    if not w:
        return 0
    count = len(_VOWEL_RUNS.findall(w))
    # only a lone final "e" (consonant before it) is silent
    if count > 1 and w.endswith("e") and w[-2] not in "aeiouy":
        count -= 1
    return max(1, count)


def text_stats(text: str) -> TextStats:
    tokens = prose_words(text)
    if not tokens:
        raise EmptyText("text has no words")
    sentences = max(1, len(split_sentences(text)))
    poly = sum(1 for w in tokens if count_syllables(w) >= 3)
    return TextStats(sentences=sentences, words=len(tokens), polysyllables=poly)


def smog(stats: TextStats) -> float:
    """SMOG grade, 3.1291 + 1.0430 * sqrt(polysyllables * 30 / sentences), unrounded."""
    if stats.sentences < 1:
        raise ValueError("SMOG needs at least one sentence")
    return SMOG_INTERCEPT + SMOG_SLOPE * math.sqrt(stats.polysyllables * 30 / stats.sentences)


def smog_text(text: str) -> float:
    return smog(text_stats(text))


# -- t distribution ------------------------------------------------------------


def _betacf(a: float, b: float, x: float, eps: float = 1e-15, max_iter: int = 500) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_tailed_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if t == 0:
        return 1.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def welch_t_test(
    mean1: float, sd1: float, n1: int, mean2: float, sd2: float, n2: int, *, pooled: bool = False
) -> TTestResult:
    """Two-sample t-test from summary statistics.

    Welch's unequal-variance test by default; ``pooled=True`` gives the
    classic equal-variance Student test.
    """
    if n1 < 2 or n2 < 2:
        raise DegenerateInput("each group needs at least two observations")
    if sd1 <= 0 or sd2 <= 0:
        raise DegenerateInput("standard deviations must be positive")
    v1, v2 = sd1 * sd1 / n1, sd2 * sd2 / n2
    if pooled:
        df = n1 + n2 - 2.0
        sp2 = ((n1 - 1) * sd1 * sd1 + (n2 - 1) * sd2 * sd2) / df
        se = math.sqrt(sp2 * (1.0 / n1 + 1.0 / n2))
    else:
        se = math.sqrt(v1 + v2)
        df = (v1 + v2) ** 2 / (v1 * v1 / (n1 - 1) + v2 * v2 / (n2 - 1))
    t = (mean1 - mean2) / se
    p = min(1.0, student_t_two_tailed_p(t, df))
    return TTestResult(mean1, sd1, n1, mean2, sd2, n2, t, df, p)


def welch_t_test_samples(a: Sequence[float], b: Sequence[float], *, pooled: bool = False) -> TTestResult:
    sa, sb = summarize_distribution(a), summarize_distribution(b)
    return welch_t_test(sa.mean, sa.std, sa.n, sb.mean, sb.std, sb.n, pooled=pooled)


# -- regression / distributions -----------------------------------------------


def linear_fit(points: Sequence[tuple[float, float]]) -> RegressionResult:
    """Ordinary least squares y = m x + b with r^2 = 1 - SS_res / SS_tot."""
    if len(points) < 2:
        raise DegenerateInput("need at least two points")
    xy = np.asarray(points, dtype=float)
    x, y = xy[:, 0], xy[:, 1]
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise DegenerateInput("all x values are equal")
    slope = float(dx @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RegressionResult(slope, intercept, min(1.0, max(0.0, r2)))


def summarize_distribution(values: Sequence[float]) -> SummaryStats:
    """Mean and sample standard deviation (n - 1), with count and range.

    A single value has std 0 and ``degenerate=True``.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise EmptyInput("no values")
    if arr.size == 1:
        v = float(arr[0])
        return SummaryStats(v, 0.0, 1, v, v, degenerate=True)
    return SummaryStats(float(arr.mean()), float(arr.std(ddof=1)), int(arr.size), float(arr.min()), float(arr.max()))


# -- ROUGE-L ------------------------------------------------------------------

_PUNCT_TABLE = str.maketrans({ch: " " for ch in string.punctuation})


def rouge_tokenize(text: str) -> list[str]:
    """Lowercase, punctuation to spaces, whitespace split."""
    return text.lower().translate(_PUNCT_TABLE).split()


def lcs_length(a: Sequence[Any], b: Sequence[Any]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l_f1(reference_tokens: Sequence[str], candidate_tokens: Sequence[str], beta: float = 1.0) -> float:
    if not reference_tokens or not candidate_tokens:
        raise EmptyInput("ROUGE-L needs non-empty reference and candidate")
    if beta <= 0:
        raise ValueError("beta must be positive")
    lcs = lcs_length(reference_tokens, candidate_tokens)
    if lcs == 0:
        return 0.0
    recall = lcs / len(reference_tokens)
    precision = lcs / len(candidate_tokens)
    b2 = beta * beta
    return (1 + b2) * recall * precision / (recall + b2 * precision)


def rouge_l_f1_text(reference: str, candidate: str, beta: float = 1.0) -> float:
    return rouge_l_f1(rouge_tokenize(reference), rouge_tokenize(candidate), beta)


# -- reports ------------------------------------------------------------------


def summary_metrics(text: str, corpus_size: int | None = None) -> dict[str, Any]:
    """Per-summary numbers: SMOG, word count, citations and (with a corpus size) utilization."""
    from .citations import validate
    from .text import word_count

    stats = text_stats(text)
    row: dict[str, Any] = {
        "smog": smog(stats),
        "sentences": stats.sentences,
        "polysyllables": stats.polysyllables,
        "words": word_count(text),
    }
    if corpus_size is not None:
        report = validate(text, corpus_size)
        row.update(
            corpus_size=corpus_size,
            total_citations=report.total_citations,
            unique_citations=len(report.unique_indices),
            out_of_range=[c.index for c in report.out_of_range],
            coverage=report.coverage_fraction,
        )
    return row


def build_metrics_report(
    summaries: Sequence[tuple[str, int | None]],
    source_texts: Sequence[str] = (),
) -> dict[str, Any]:
    """Aggregate report over ``(summary_text, corpus_size)`` pairs.

    ``source_texts`` (e.g. raw trial descriptions) enables the readability
    comparison between sources and summaries.
    """
    rows = [summary_metrics(text, size) for text, size in summaries]
    report: dict[str, Any] = {"summaries": rows}
    if rows:
        report["word_count"] = asdict(summarize_distribution([r["words"] for r in rows]))
        report["smog"] = asdict(summarize_distribution([r["smog"] for r in rows]))
    sized = [r for r in rows if "coverage" in r]
    if sized:
        report["utilization"] = asdict(summarize_distribution([r["coverage"] for r in sized]))
        xs = {r["corpus_size"] for r in sized}
        if len(sized) >= 2 and len(xs) >= 2:
            fit = linear_fit([(r["corpus_size"], r["unique_citations"]) for r in sized])
            report["reference_inclusion_fit"] = asdict(fit)
    if source_texts:
        source_smog = [smog_text(t) for t in source_texts if t.strip()]
        report["source_smog"] = asdict(summarize_distribution(source_smog))
        if len(source_smog) >= 2 and len(rows) >= 2:
            try:
                result = welch_t_test_samples(source_smog, [r["smog"] for r in rows])
                report["readability_t_test"] = asdict(result)
            except DegenerateInput as exc:
                report["readability_t_test"] = {"error": str(exc)}
    return report
