import re
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from conftest import make_corpus
from golden_inputs import GOLDENS, REDUCE_SUMMARIES, golden_corpus
from trialsumm.batching import make_batches, word_budget
from trialsumm.prompting import (
    InvariantViolation,
    MapPromptInput,
    ReducePromptInput,
    render_map_prompt,
    render_reduce_prompt,
)

GOLDEN = Path(__file__).parent / "fixtures" / "golden"


@pytest.mark.parametrize("name", sorted(GOLDENS))
def test_golden(name):
    assert GOLDENS[name]() == (GOLDEN / name).read_text()


def test_map_prompt_structure_in_order():
    text = GOLDENS["map_15.txt"]()
    anchors = [
        "from 15 trials delimited in the triple backticks labeled from 1 to 15",
        "purpose of Fitbit in general physiology trials",
        "Your reader will be clinical research coordinators.",
        "Write a 200 word thesis with references to the trials in the following format: [1].",
        "Trials: ```\n1. Wearable study 1\n",
    ]
    positions = [text.index(a) for a in anchors]
    assert positions == sorted(positions)
    assert text.endswith("\n```")


def test_singular_trial():
    text = GOLDENS["map_1.txt"]()
    assert "from 1 trial delimited" in text
    assert "1 trials" not in text
    assert "Write a 13 word thesis" in text


def test_deterministic():
    assert GOLDENS["map_15.txt"]() == GOLDENS["map_15.txt"]()
    assert GOLDENS["reduce_3.txt"]() == GOLDENS["reduce_3.txt"]()


@given(st.integers(1, 15), st.integers(0, 50))
def test_titles_once_dense_indices_balanced_fences(n, seed):
    corpus = make_corpus(n, seed)
    batch = make_batches(corpus)[0]
    text = render_map_prompt(MapPromptInput("Fitbit", "oncology", batch, word_budget(batch)))
    for t in batch.trials:
        assert text.count(t.title + "\n") == 1
    block = text.split("Trials: ```\n", 1)[1]
    assert [int(i) for i in re.findall(r"^(\d+)\. ", block, re.MULTILINE)] == list(range(1, n + 1))
    assert text.count("```") % 2 == 0


def test_backticks_in_trial_text_cannot_unbalance():
    corpus = golden_corpus(2)
    t = corpus.trials[0].__class__(**{**corpus.trials[0].__dict__, "brief_summary": "Uses ``` fences."})
    text = render_map_prompt(MapPromptInput("Fitbit", "oncology", [t], 13))
    assert text.count("```") == 2


def test_map_invariants():
    trials = golden_corpus(2).trials
    with pytest.raises(InvariantViolation):
        render_map_prompt(MapPromptInput("Fitbit", "oncology", trials, 12))
    with pytest.raises(InvariantViolation):
        render_map_prompt(MapPromptInput("Fitbit", "oncology", [], 13))


def test_reduce_structure():
    text = GOLDENS["reduce_3.txt"]()
    anchors = [
        "construct a cumulative argument about the purpose of Fitbit in general physiology trials",
        "Weigh each paragraph according to its word count",
        "Your reader will be clinical research coordinators.",
        "Summary: ```\n",
        "References: ```\n",
        "Write a 150-250-word thesis with references to the trials in the following format: [1].",
    ]
    positions = [text.index(a) for a in anchors]
    assert positions == sorted(positions)
    summary_block = text.split("Summary: ```\n", 1)[1].split("\n```", 1)[0]
    assert summary_block.split("\n\n") == REDUCE_SUMMARIES


def test_reduce_two_sentences_verbatim():
    text = render_reduce_prompt(ReducePromptInput("Fitbit", "oncology", ["One [1].", "Two [2]."], "1. a\n2. b"))
    block = text.split("Summary: ```\n", 1)[1].split("\n```", 1)[0]
    assert block == "One [1].\n\nTwo [2]."


def test_reduce_invariants():
    with pytest.raises(InvariantViolation, match="two"):
        render_reduce_prompt(ReducePromptInput("F", "x", ["only [1]."], "1. a"))
    with pytest.raises(InvariantViolation, match="reference list"):
        render_reduce_prompt(ReducePromptInput("F", "x", ["a [1].", "b [7]."], "1. a"))


def test_template_override():
    custom = "{n_trials}|{trial_noun}|{device}|{field_name}|{audience}|{budget_words}|{trials}"
    out = render_map_prompt(MapPromptInput("Oura", "somnology", golden_corpus(1).trials, 13, audience="nurses"), template=custom)
    assert out.startswith("1|trial|Oura|somnology|nurses|13|1. Wearable study 1")
