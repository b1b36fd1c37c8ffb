"""Fixed inputs for the golden prompt files in fixtures/golden."""

from trialsumm.batching import BudgetPolicy, make_batches, word_budget
from trialsumm.prompting import MapPromptInput, ReducePromptInput, render_map_prompt, render_reduce_prompt, render_reference_block
from trialsumm.trial_model import Corpus, Trial, TrialStatus


def golden_trial(i: int) -> Trial:
    return Trial(
        id=f"NCT{20_000_000 + i:08d}",
        title=f"Wearable study {i}",
        brief_summary=f"Study {i} tracks daily steps with a Fitbit. Adults wear it for {i + 4} weeks.",
        status=TrialStatus.COMPLETED,
        enrollment=100,
    )


def golden_corpus(n: int) -> Corpus:
    return Corpus("Fitbit", "general_physiology", None, tuple(golden_trial(i) for i in range(1, n + 1)))


def map_prompt(n: int) -> str:
    batch = make_batches(golden_corpus(n), BudgetPolicy())[0]
    return render_map_prompt(MapPromptInput("Fitbit", "general physiology", batch, word_budget(batch)))


REDUCE_SUMMARIES = [
    "Fitbit devices support step tracking after surgery [1]. Adults improve activity [3].",
    "Sleep feedback from wearables lengthens rest in shift workers [16].",
    "Heart rate monitoring informs pregnancy care [31], [33].",
]


def reduce_prompt() -> str:
    corpus = golden_corpus(33)
    refs = render_reference_block([(i, corpus.trial_at(i).title) for i in (1, 3, 16, 31, 33)])
    return render_reduce_prompt(ReducePromptInput("Fitbit", "general physiology", REDUCE_SUMMARIES, refs, 150, 250))


GOLDENS = {
    "map_15.txt": lambda: map_prompt(15),
    "map_10.txt": lambda: map_prompt(10),
    "map_1.txt": lambda: map_prompt(1),
    "reduce_3.txt": reduce_prompt,
}
