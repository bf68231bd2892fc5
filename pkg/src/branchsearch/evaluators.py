"""Step feasibility and answer on-topic judges, plus frontier ranking."""

from __future__ import annotations

import re
from typing import Sequence

from .context import ParseError, RunContext, as_context
from .core import AnswerVerdict, Category, FeasibilityVerdict, Node, Question, SearchConfig, Trajectory
from .gateway import Gateway
from .prompts import answer_eval_request, step_eval_request

UNPARSEABLE_STEP = "evaluator output unparseable"

_CATEGORY_WORD = re.compile(r"\b(sure|maybe|impossible)\b", re.IGNORECASE)
_CATEGORY_LABEL = re.compile(r"\b(?:category|verdict|level)\s*:", re.IGNORECASE)
_ANALYSIS_LABEL = re.compile(r"\b(?:analysis|justification|thought)\s*:", re.IGNORECASE)
_THOUGHT_LABEL = re.compile(r"\bTHOUGHT\s*:", re.IGNORECASE)
_JUDGMENT_LABEL = re.compile(r"\bJUDG(?:E)?MENT\s*:", re.IGNORECASE)
_YES_NO = re.compile(r"\b(yes|no)\b", re.IGNORECASE)
_RANK = {Category.SURE: 0, Category.MAYBE: 1}


def parse_step_verdict(raw: str) -> FeasibilityVerdict:
    """Read a sure/maybe/impossible category and its justification.

    A ``CATEGORY:`` label wins; otherwise the first category word in the text
    is taken. Raises :class:`ParseError` (``no_category``) when none appears.
    """
    if not isinstance(raw, str):
        raise ParseError("no_category", "input is not text")
    label = _CATEGORY_LABEL.search(raw)
    m = _CATEGORY_WORD.search(raw, label.end()) if label else None
    if m is None:
        m = _CATEGORY_WORD.search(raw)
    if m is None:
        raise ParseError("no_category")
    category = Category(m.group(1).lower())

    analysis = _ANALYSIS_LABEL.search(raw)
    if analysis:
        end = label.start() if label and label.start() > analysis.end() else len(raw)
        rationale = raw[analysis.end() : end]
    else:
        rationale = raw[: m.start()] + raw[m.end() :]
        if label:
            rationale = rationale.replace(label.group(0), " ", 1)
    rationale = " ".join(rationale.split()).strip(" -\u2013\u2014:.,;")
    return FeasibilityVerdict(category, rationale or f"categorized as {category.value}")


def evaluate_step(
    question: Question,
    trajectory: Trajectory,
    gateway: Gateway | RunContext,
    config: SearchConfig | None = None,
) -> FeasibilityVerdict:
    """Judge the tail step of ``trajectory``; fails open to ``maybe``."""
    ctx = as_context(gateway, config)
    if not trajectory.nodes:
        raise ValueError("cannot evaluate an empty trajectory")
    req = step_eval_request(question, trajectory, ctx.config.temperature, ctx.model)
    try:
        return ctx.call_parsed(req, parse_step_verdict, "end with 'CATEGORY: sure', 'maybe' or 'impossible'")
    except ParseError:
        return FeasibilityVerdict(Category.MAYBE, UNPARSEABLE_STEP)


def rank_frontier(nodes: Sequence[Node]) -> list[Node]:
    """Sure nodes, then maybe nodes, in generation order; impossible ones dropped."""
    for n in nodes:
        if n.verdict is None:
            raise ValueError(f"node {n.id} has no verdict")
    kept = [n for n in nodes if n.verdict.category is not Category.IMPOSSIBLE]
    return sorted(kept, key=lambda n: _RANK[n.verdict.category])


def parse_judgment(raw: str) -> AnswerVerdict:
    """Read ``THOUGHT: ...`` and the first YES/NO after ``JUDGMENT:``.

    Raises :class:`ParseError` (``no_judgment_token``) if no judgment is found.
    """
    if not isinstance(raw, str):
        raise ParseError("no_judgment_token", "input is not text")
    jm = _JUDGMENT_LABEL.search(raw)
    token = _YES_NO.search(raw, jm.end()) if jm else None
    if token is None:
        raise ParseError("no_judgment_token")
    tm = _THOUGHT_LABEL.search(raw, 0, jm.start())
    thought = raw[tm.end() : jm.start()].strip() if tm else ""
    return AnswerVerdict(token.group(1).lower() == "yes", thought)


def evaluate_answer(
    question: Question,
    answer: str,
    gateway: Gateway | RunContext,
    config: SearchConfig | None = None,
) -> AnswerVerdict:
    """Ask whether ``answer`` is on-topic; an unparseable judgment counts as NO."""
    ctx = as_context(gateway, config)
    if not answer.strip():
        raise ValueError("empty answer")
    req = answer_eval_request(question, answer, ctx.config.temperature, ctx.model)
    try:
        return ctx.call_parsed(req, parse_judgment, "end with 'JUDGMENT: YES' or 'JUDGMENT: NO'")
    except ParseError as exc:
        return AnswerVerdict(False, f"judgment unparseable ({exc.code})")
