"""Switch modules off one at a time on the publisher question.

The scripted model from data/publisher answers every prompt, so the runs are
reproducible without an endpoint. Watch what the answer evaluator buys: with
it disabled the first Finish reached (John Brown Publishing) is accepted.

    python demos/ablations.py
"""

from __future__ import annotations

import sys
from pathlib import Path

from branchsearch import Gateway, Mode, SearchConfig, solve
from branchsearch.environments import WikiEnvironment
from branchsearch.gateway import ScriptedBackend
from branchsearch.metrics import exact_match

PUBLISHER = Path(__file__).resolve().parent.parent / "data" / "publisher"
sys.path.insert(0, str(PUBLISHER))
from scenario import make_responder, question  # noqa: E402

RUNS = {
    "full search": SearchConfig(),
    "no answer evaluator": SearchConfig(answer_eval_enabled=False),
    "cross-branch siblings": SearchConfig(cross_branch_siblings=True),
    "budget of 10 calls": SearchConfig(llm_call_budget=10),
}


def main() -> None:
    q = question()
    corpus = WikiEnvironment.load(PUBLISHER / "corpus.json")
    print(f"{q.text}\n")
    print(f"{'setting':<24}{'status':<18}{'answer':<24}{'EM':>4}{'calls':>7}{'errors':>8}")
    for name, cfg in RUNS.items():
        gateway = Gateway(Mode.LIVE, ScriptedBackend(make_responder()))
        out = solve(q, corpus, gateway, cfg)
        em = int(exact_match(out.answer or "", q.gold_answer))
        print(f"{name:<24}{out.status.value:<18}{out.answer or '-':<24}{em:>4}{out.stats.llm_calls:>7}{len(out.errors):>8}")


if __name__ == "__main__":
    main()
