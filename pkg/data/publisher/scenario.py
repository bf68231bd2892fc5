"""Scripted model for the two-magazine publisher question, and cassette recorder.

The script plays out this search:

* branch "Charles Fort": a vague ``Search[Charles Fort publishing company]``
  fails and is pruned; ``Finish[John Brown Publishing]`` (only a temporary
  publisher of Fortean Times) is rejected and becomes an error record; the
  remaining node leads nowhere, so the branch fails;
* branch "Bizarre": with the error in its prompt the model switches to
  ``Search[Bizarre magazine]`` and answers ``Finish[Dennis Publishing]``,
  which is accepted.

Run ``python data/publisher/scenario.py`` to re-record ``cassette.jsonl``.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from pathlib import Path

from branchsearch import Dataset, Gateway, Mode, Question, solve
from branchsearch.environments import WikiEnvironment
from branchsearch.gateway import ChatRequest, ScriptedBackend
from branchsearch.prompts import _generation_parts, prompt_kind

HERE = Path(__file__).resolve().parent
CORPUS = HERE / "corpus.json"
CASSETTE = HERE / "cassette.jsonl"
QUESTIONS = HERE / "questions.json"


def question() -> Question:
    rec = json.loads(QUESTIONS.read_text(encoding="utf-8"))[0]
    return Question(rec["_id"], rec["question"], rec["answer"], rec["level"], Dataset.HOTPOTQA)


def _node(thought: str, action: str) -> str:
    return f"Thought: {thought}\nAction: {action}"


PUBCO = _node(
    "Charles Fort was a writer. Maybe there is a publishing company named after him.",
    "Search[Charles Fort publishing company]",
)
FORTEAN = _node(
    "The search for a Charles Fort publishing company found nothing. The magazine named after Fort is Fortean Times, so I should search it.",
    "Search[Fortean Times]",
)
LOOKUP = _node(
    "Another node already searches Fortean Times. I can instead look up which magazine the Charles Fort page mentions.",
    "Lookup[magazine]",
)
JOHN_BROWN = _node(
    "Fortean Times was published by John Brown Publishing. That should be the answer.",
    "Finish[John Brown Publishing]",
)
FORT_PUBLISHER = _node(
    "Perhaps Charles Fort ran his own press.",
    "Search[Charles Fort publisher]",
)
FT_PUBLISHER = _node(
    "John Brown Publishing was rejected because it was only a temporary publisher. This branch only leads back to Fortean Times.",
    "Search[Fortean Times publisher]",
)
BIZARRE_MAG = _node(
    "John Brown Publishing was rejected because the publisher of Bizarre was never confirmed. The similar results include Bizarre magazine, so I should search it.",
    "Search[Bizarre magazine]",
)
ALBUM = _node(
    "Another node already searches Bizarre magazine. The other similar result is an album.",
    "Search[Bizarre (album)]",
)
DENNIS = _node(
    "Bizarre was published by Dennis Publishing, which also publishes Fortean Times, the magazine named after Charles Fort. The common publisher is Dennis Publishing.",
    "Finish[Dennis Publishing]",
)
DENNIS_SEARCH = _node(
    "Another node answers Dennis Publishing. I can confirm by searching the company.",
    "Search[Dennis Publishing]",
)

# Replies per parent action, in call order.
GENERATIONS = {
    "Search[Charles Fort]": [PUBCO, FORTEAN, LOOKUP],
    "Search[Fortean Times]": [JOHN_BROWN, JOHN_BROWN, FORT_PUBLISHER],
    "Lookup[magazine]": [FT_PUBLISHER, FT_PUBLISHER, FT_PUBLISHER],
    "Search[Bizarre]": [BIZARRE_MAG, ALBUM, BIZARRE_MAG],
    "Search[Bizarre magazine]": [DENNIS, DENNIS_SEARCH, DENNIS],
}

STEP_VERDICTS = {
    "Search[Charles Fort publishing company]": ("impossible", "The search returned no page; the keyword is too vague to name a real entity."),
    "Search[Fortean Times]": ("sure", "Fortean Times is the magazine named after Charles Fort and its page names a publisher."),
    "Lookup[magazine]": ("maybe", "The lookup confirms the magazine name but adds no publisher information."),
    "Finish[John Brown Publishing]": ("sure", "The observation names John Brown Publishing as a publisher of Fortean Times."),
    "Search[Charles Fort publisher]": ("impossible", "No such page exists and the step repeats a failed search."),
    "Search[Fortean Times publisher]": ("impossible", "No such page exists and the step repeats earlier searches."),
    "Search[Bizarre magazine]": ("sure", "The page names Dennis Publishing as the publisher of Bizarre and of Fortean Times."),
    "Search[Bizarre (album)]": ("impossible", "The album is unrelated to the magazine in the question."),
    "Finish[Dennis Publishing]": ("sure", "Both magazines are confirmed to be published by Dennis Publishing."),
    "Search[Dennis Publishing]": ("maybe", "The page lists both magazines but the answer is already supported."),
}

ANSWER_VERDICTS = {
    "John Brown Publishing": (
        "NO",
        "John Brown Publishing only published Fortean Times from 1991 to 2001, and nothing shows that it published Bizarre. "
        "It is a temporary publisher of one magazine, not a confirmed common publisher.",
    ),
    "Dennis Publishing": (
        "YES",
        "The question asks for a company that published both magazines. Dennis Publishing is a publishing company that published Bizarre and Fortean Times.",
    ),
}

_ACTION_LINE = re.compile(r"^Action: (.+)$", re.MULTILINE)


def _parent_action(user: str) -> str:
    parts = _generation_parts()
    cut = len(user)
    for marker in (parts.error_header, parts.sibling_header, "Write the next step"):
        i = user.find(marker)
        if i != -1:
            cut = min(cut, i)
    return _ACTION_LINE.findall(user[:cut])[-1]


def make_responder():
    """Fresh stateful responder: generation replies are served per parent in order."""
    calls: Counter[str] = Counter()

    def respond(request: ChatRequest) -> str:
        kind = prompt_kind(request)
        user = request.messages[1].content
        if kind == "extract":
            return '["Charles Fort", "Bizarre"]'
        if kind == "step_eval":
            action = _ACTION_LINE.findall(user.split("NEW STEP:", 1)[1])[0]
            category, why = STEP_VERDICTS[action]
            return f"ANALYSIS: {why}\nCATEGORY: {category}"
        if kind == "answer_eval":
            answer = user.split("Get_answer:", 1)[1].strip()
            judgment, why = ANSWER_VERDICTS[answer]
            return f"THOUGHT: {why}\nJUDGMENT: {judgment}"
        parent = _parent_action(user)
        i = calls[parent]
        calls[parent] += 1
        return GENERATIONS[parent][i]

    return respond


def record(cassette: Path = CASSETTE):
    """Run the scripted search in record mode; returns the outcome."""
    if cassette.exists():
        cassette.unlink()
    gateway = Gateway(Mode.RECORD, ScriptedBackend(make_responder()), cassette_path=cassette)
    return solve(question(), WikiEnvironment.load(CORPUS), gateway)


if __name__ == "__main__":
    outcome = record()
    print(f"{outcome.status.value}: {outcome.answer} ({outcome.stats.llm_calls} calls) -> {CASSETTE}")
