"""Walk through the two-magazine publisher question, replayed from its cassette.

No endpoint is needed: every model reply comes from data/publisher/cassette.jsonl.

    python demos/publisher_question.py
"""

from __future__ import annotations

import sys
from pathlib import Path

from branchsearch import Gateway, Mode, solve_with_trace
from branchsearch.cli import render_trace
from branchsearch.core import EventKind
from branchsearch.environments import WikiEnvironment

PUBLISHER = Path(__file__).resolve().parent.parent / "data" / "publisher"
sys.path.insert(0, str(PUBLISHER))
from scenario import question  # noqa: E402


def main() -> None:
    q = question()
    print(f"Question: {q.text}\nGold answer: {q.gold_answer}\n")

    gateway = Gateway(Mode.REPLAY, cassette_path=PUBLISHER / "cassette.jsonl")
    outcome, trace = solve_with_trace(q, WikiEnvironment.load(PUBLISHER / "corpus.json"), gateway)

    (extract,) = trace.of_kind(EventKind.EXTRACT)
    print("1. The extractor names the entities that seed one branch each:")
    print("   ", extract.payload["entities"], "\n")

    print("2. Every rejected answer becomes an error record that later prompts carry:")
    for rec in outcome.errors:
        print(f"    branch {rec.branch}: {rec.rejected_answer!r} rejected because {rec.rationale}")
    print()

    print("3. The full search tree, as `branchsearch replay` would print it:\n")
    print(render_trace(trace.events))
    print()
    print(f"Outcome: {outcome.status.value}, answer {outcome.answer!r}, {outcome.stats.llm_calls} model calls")


if __name__ == "__main__":
    main()
