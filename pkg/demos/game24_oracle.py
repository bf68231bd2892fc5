"""Solve Game of 24 puzzles with no model at all.

The enumerating generator proposes every canonical move and the arithmetic
judge checks final answers, so the search itself is exercised end to end.
Each result is compared with an exhaustive brute-force solver.

    python demos/game24_oracle.py 4 9 10 13
    python demos/game24_oracle.py            # a small built-in set
"""

from __future__ import annotations

import sys
import time

from branchsearch import Gateway, SearchConfig, solve
from branchsearch.core import Dataset, Question
from branchsearch.environments.game24 import COMPLETE_K, Game24Environment, game24_brute_force

PUZZLES = ["4 9 10 13", "1 1 4 6", "3 3 8 8", "1 5 5 5", "1 1 1 1", "7 7 7 7"]


def run(text: str) -> None:
    q = Question(text.replace(" ", "-"), text, dataset=Dataset.GAME24)
    env = Game24Environment.for_question(q)
    cfg = SearchConfig(k=COMPLETE_K, extractor_enabled=False, step_eval_enabled=False)
    start = time.perf_counter()
    outcome = solve(q, env, Gateway.scripted([], record=False), cfg, generate=env.enumerating_generator(), judge_answer=env.judge)
    ms = (time.perf_counter() - start) * 1000
    solvable, witness = game24_brute_force([int(x) for x in text.split()])
    found = outcome.answer if outcome.answer is not None else "-"
    agree = "agrees" if (outcome.answer is not None) == solvable else "DISAGREES"
    print(f"{text:<12} {outcome.status.value:<16} {found:<24} {outcome.stats.expansions:>5} expansions {ms:7.1f} ms  brute force {agree} ({witness or 'no solution'})")


def main(argv: list[str]) -> None:
    puzzles = [" ".join(argv)] if argv else PUZZLES
    for p in puzzles:
        run(p)


if __name__ == "__main__":
    main(sys.argv[1:])
