import itertools
import json
import random
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import pytest

from branchsearch.core import Finish, Lookup, Node, Propose, Question, Search, Trajectory
from branchsearch.environments import ActionError, replay_session
from branchsearch.environments.game24 import (
    Game24Environment,
    Game24State,
    evaluate_expression,
    game24_apply,
    game24_brute_force,
    game24_candidate_moves,
    game24_enumerate_children,
    game24_solved,
    load_puzzles,
)
from branchsearch.environments.wiki import Corpus, WikiEnvironment

from reference import solve24

FORT = {
    "Fortean Times": [
        "Fortean Times is a British monthly magazine. It was published by John Brown Publishing. The magazine moved later.",
        "Since 2001 the magazine has been published by Dennis Publishing.",
    ],
    "Charles Fort": ["Charles Hoy Fort was an American writer."],
    "Fort Worth": ["Fort Worth is a city."],
}


def wiki():
    return WikiEnvironment(Corpus.from_mapping(FORT))


# --- encyclopedia --------------------------------------------------------------


def test_search_returns_first_paragraph_case_insensitively():
    s = wiki().new_session()
    assert s.step(Search("fortean times")).startswith("Fortean Times is a British monthly magazine.")
    assert "Dennis" not in s.step(Search("Fortean Times"))


def test_search_miss_lists_similar_titles():
    obs = wiki().new_session().step(Search("Charles Fort publishing company"))
    assert obs == "Could not find [Charles Fort publishing company]. Similar: ['Charles Fort', 'Fort Worth']."
    assert "Similar: []" in wiki().new_session().step(Search("zzz"))


def test_lookup_cycles_through_matches():
    s = wiki().new_session()
    s.step(Search("Fortean Times"))
    assert s.step(Lookup("magazine")) == "(Result 1 / 3) Fortean Times is a British monthly magazine."
    assert s.step(Lookup("magazine")) == "(Result 2 / 3) The magazine moved later."
    assert s.step(Lookup("magazine")).startswith("(Result 3 / 3) Since 2001")
    assert s.step(Lookup("magazine")) == "No more results."
    # a new search resets the cursors
    s.step(Search("Fortean Times"))
    assert s.step(Lookup("magazine")).startswith("(Result 1 / 3)")


def test_lookup_before_search_and_unsupported():
    s = wiki().new_session()
    with pytest.raises(ActionError) as ei:
        s.step(Lookup("x"))
    assert ei.value.code == "lookup_before_search"
    with pytest.raises(ActionError):
        s.step(Propose("1 + 2"))


def test_finish_is_terminal():
    s = wiki().new_session()
    assert s.step(Finish("Dennis Publishing")) == "Dennis Publishing"
    assert s.terminal and s.final_answer == "Dennis Publishing"


def test_observation_clipping():
    env = WikiEnvironment(Corpus.from_mapping({"Long": ["x" * 50]}), obs_chars=10)
    assert env.new_session().step(Search("Long")) == "x" * 10 + "..."


def test_replay_session_rederives_state():
    path = [
        Node(0, 0, 0, None, "t", Search("Fortean Times"), "obs"),
        Node(1, 0, 1, 0, "t", Lookup("magazine"), "obs"),
        Node(2, 0, 2, 1, "t", Lookup("magazine")),  # not executed: skipped
    ]
    s = replay_session(wiki(), path)
    assert s.step(Lookup("magazine")).startswith("(Result 2 / 3)")


def test_corpus_load(tmp_path):
    import json

    p = tmp_path / "c.json"
    p.write_text(json.dumps(FORT), encoding="utf-8")
    env = WikiEnvironment.load(p)
    assert len(env.corpus) == 3 and "charles fort" in env.corpus


# --- Game of 24 ----------------------------------------------------------------


def test_apply_and_solved():
    st = Game24State.start([4, 4, 6, 8])
    st = game24_apply(st, "8 + 4")
    assert sorted(st.remaining) == [4, 6, 12]
    st = game24_apply(st, "6 − 4")
    st = game24_apply(st, "2 × 12")
    assert game24_solved(st)
    assert evaluate_expression(st.expressions[0], [4, 4, 6, 8]) == 24


@pytest.mark.parametrize(
    "expr,code",
    [("5 + 4", "operand_not_available"), ("4 + 4 + 4", "malformed_expression"), ("8 / 0", "operand_not_available"), ("two plus", "malformed_expression")],
)
def test_apply_errors(expr, code):
    with pytest.raises(ActionError) as ei:
        game24_apply(Game24State.start([4, 4, 6, 8]), expr)
    assert ei.value.code == code


def test_division_by_zero():
    with pytest.raises(ActionError) as ei:
        game24_apply(Game24State((Fraction(0), Fraction(3))), "3 / 0")
    assert ei.value.code == "division_by_zero"


def test_fractions_are_exact():
    st = game24_apply(Game24State.start([3, 3, 8, 8]), "8 / 3")
    st = game24_apply(st, "3 - 8/3")
    assert Fraction(1, 3) in st.remaining
    st = game24_apply(st, "8 / 1/3")
    assert st.remaining == (Fraction(8),) or 24 in st.remaining


def test_evaluate_expression():
    assert evaluate_expression("8 / (3 - 8 / 3)", [3, 3, 8, 8]) == 24
    assert evaluate_expression("(1 + 2 + 3) * 4 = 24", [1, 2, 3, 4]) == 24
    for bad in ("8 / (3 - 8 / 3) + 1", "__import__('os')", "2 ** 4 + 8", "8*3"):
        with pytest.raises(ActionError):
            evaluate_expression(bad, [3, 3, 8, 8])


def test_brute_force_examples():
    assert game24_brute_force([4, 4, 6, 8])[0]
    ok, witness = game24_brute_force([3, 3, 8, 8])
    assert ok and evaluate_expression(witness, [3, 3, 8, 8]) == 24
    assert game24_brute_force([1, 1, 1, 1]) == (False, None)
    with pytest.raises(ValueError):
        game24_brute_force([1, 2, 3])
    with pytest.raises(ValueError):
        game24_brute_force([0, 2, 3, 4])


ALL_TUPLES = list(itertools.combinations_with_replacement(range(1, 14), 4))


FROZEN = json.loads((Path(__file__).parent / "fixtures" / "game24_all.json").read_text(encoding="utf-8"))


def test_brute_force_matches_frozen_independent_verdicts_on_all_tuples():
    assert len(ALL_TUPLES) == len(FROZEN) == 1820
    assert sum(FROZEN.values()) == 1362  # the well-known count of solvable 1..13 puzzles
    mismatches = []
    for t in ALL_TUPLES:
        ok, witness = game24_brute_force(t)
        if ok != FROZEN[" ".join(map(str, t))] or (ok and evaluate_expression(witness, t) != 24):
            mismatches.append(t)
    assert mismatches == []


def test_frozen_verdicts_reproduce_on_a_sample():
    rng = random.Random(7)
    for t in rng.sample(ALL_TUPLES, 60):
        assert (solve24(t) is not None) == FROZEN[" ".join(map(str, t))]


@lru_cache(maxsize=None)
def _reachable_by_canonical_moves(values: tuple) -> bool:
    state = Game24State(values)
    if len(values) == 1:
        return game24_solved(state)
    for _, action in game24_candidate_moves(state):
        nxt = game24_apply(state, action.payload)
        if _reachable_by_canonical_moves(tuple(sorted(nxt.remaining))):
            return True
    return False


def test_canonical_moves_are_complete_on_all_tuples():
    """Restricting to larger-minus-smaller subtraction loses no solution."""
    for t in ALL_TUPLES:
        assert _reachable_by_canonical_moves(tuple(Fraction(x) for x in sorted(t))) == game24_brute_force(t)[0], t


def test_candidate_moves_order_and_dedup():
    moves = [a.payload for _, a in game24_candidate_moves(Game24State.start([4, 4, 6, 8]))]
    assert moves[:5] == ["4 + 4", "4 - 4", "4 * 4", "4 / 4", "4 + 6"]
    assert len(moves) == len(set(moves))
    with pytest.raises(ValueError):
        game24_candidate_moves(Game24State.start([24]))


def test_enumerate_children_links_parent():
    parent = Node(5, 0, 0, None, "t", Search("4 4 6 8"), "Remaining: 4 4 6 8")
    kids = game24_enumerate_children(Game24State.start([4, 4, 6, 8]), 3, parent)
    assert [k.id for k in kids] == [6, 7, 8] and all(k.parent == 5 and k.depth == 1 for k in kids)


def test_session_terminal_answer_and_judge():
    env = Game24Environment.for_question(Question("g", "4 4 6 8", dataset="game24"))
    s = env.new_session()
    assert s.step(env.seed_action("ignored")) == "Remaining: 4 4 6 8"
    s.step(Propose("8 + 4"))
    s.step(Propose("6 - 4"))
    assert s.step(Propose("2 * 12")) == "Remaining: 24"
    assert s.terminal and s.final_answer == "(6 - 4) * (8 + 4)"
    with pytest.raises(ActionError):
        s.step(Propose("1 + 1"))
    root = Node(0, 0, 0, None, "t", Search("4 4 6 8"), "Remaining: 4 4 6 8")
    path = [root]
    for i, e in enumerate(["8 + 4", "6 - 4", "2 * 12"], start=1):
        path.append(Node(i, 0, i, i - 1, "t", Propose(e), "obs"))
    assert env.judge(None, s.final_answer, Trajectory(tuple(path))).on_topic
    wrong = path[:3] + [Node(3, 0, 3, 2, "t", Propose("2 + 12"), "obs")]
    assert not env.judge(None, "x", Trajectory(tuple(wrong))).on_topic
    fin = Trajectory((root, Node(1, 0, 1, 0, "t", Finish("(8 + 4) * (6 - 4)"))))
    assert env.judge(None, "(8 + 4) * (6 - 4)", fin).on_topic
    assert not env.judge(None, "8 + 4 + 6 + 4", fin).on_topic


def test_load_puzzles(tmp_path):
    p = tmp_path / "p.txt"
    p.write_text("4 4 6 8\n\n1 1 1 1\n", encoding="utf-8")
    assert load_puzzles(p) == [(4, 4, 6, 8), (1, 1, 1, 1)]
