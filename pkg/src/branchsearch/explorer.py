"""Entity-seeded depth-first search with pruning, verification and backtracking."""

from __future__ import annotations

import itertools
import time
from collections import Counter, defaultdict
from typing import Callable, Sequence

from .context import BudgetExceeded, ParseError, RunContext
from .core import (
    AnswerVerdict,
    ErrorRecord,
    EventKind,
    FeasibilityVerdict,
    Node,
    Question,
    SearchConfig,
    SearchOutcome,
    Status,
    Trace,
    Trajectory,
    validate_config,
)
from .environments.base import ActionError, Environment, EnvironmentFailure, replay_session
from .evaluators import UNPARSEABLE_STEP, evaluate_answer, evaluate_step, rank_frontier
from .extractor import extract_entities, synthetic_entity
from .gateway import Gateway, Mode
from .generator import AllCandidatesFailed, generate_children

StepJudge = Callable[[Question, Trajectory, RunContext], FeasibilityVerdict]
AnswerJudge = Callable[[Question, str, Trajectory, RunContext], AnswerVerdict]


def next_node(stack: list[list[Node]]) -> Node | None:
    """Pop the head of the deepest non-empty frontier (DFS order)."""
    while stack and not stack[-1]:
        stack.pop()
    if not stack:
        return None
    return stack[-1].pop(0)


def _llm_step_judge(question: Question, trajectory: Trajectory, ctx: RunContext) -> FeasibilityVerdict:
    return evaluate_step(question, trajectory, ctx)


def _llm_answer_judge(question: Question, answer: str, trajectory: Trajectory, ctx: RunContext) -> AnswerVerdict:
    return evaluate_answer(question, answer, ctx)


class _Search:
    def __init__(self, question, env, ctx, generate, judge_step, judge_answer):
        self.question = question
        self.env = env
        self.ctx = ctx
        self.cfg: SearchConfig = ctx.config
        self.generate = generate
        self.judge_step = judge_step
        self.judge_answer = judge_answer
        self._ids = itertools.count()
        self.errors: list[ErrorRecord] = []
        self.paths: dict[int, Trajectory] = {}
        self.answers: dict[int, str] = {}
        self.depth_cuts = 0
        self.answers_judged = 0
        # every generated node of finished branches by depth, pruned ones
        # included, for cross-branch sibling feedback
        self.by_depth: dict[int, list[Node]] = defaultdict(list)
        self.branch_nodes: list[Node] = []

    def emit(self, kind: EventKind, payload: dict) -> None:
        self.ctx.trace.emit(kind, payload)

    def new_id(self) -> int:
        return next(self._ids)

    # -- environment -------------------------------------------------------

    def execute(self, node: Node, prefix: Sequence[Node]) -> Node:
        try:
            session = replay_session(self.env, prefix)
            observation = session.step(node.action)
        except ActionError as exc:
            observation = f"Invalid action ({exc})"
        except Exception as exc:
            raise EnvironmentFailure(f"{type(exc).__name__} while executing {node.action}: {exc}") from exc
        self.ctx.stats.tool_calls += 1
        node = node.with_observation(observation)
        payload = {"node_id": node.id, "action": node.action.to_dict(), "observation": observation}
        if session.terminal and session.final_answer is not None:
            self.answers[node.id] = session.final_answer
            payload["final_answer"] = session.final_answer
        self.emit(EventKind.TOOL_EXEC, payload)
        return node

    # -- main loop -----------------------------------------------------------

    def seeds(self) -> list[str]:
        try:
            entities = extract_entities(self.question, self.ctx)
            fallback = None
        except ParseError as exc:
            entities = [synthetic_entity(self.question)]
            fallback = exc.code
        surfaces = [e.surface for e in entities]
        payload = {"entities": surfaces, "enabled": self.cfg.extractor_enabled}
        if fallback:
            payload["fallback"] = fallback
        self.emit(EventKind.EXTRACT, payload)
        return surfaces

    def run(self) -> tuple[Status, str | None, Trajectory | None]:
        for branch, entity in enumerate(self.seeds()):
            found = self.run_branch(branch, entity)
            if found is not None:
                return Status.SOLVED, found[0], found[1]
            self.emit(EventKind.BACKTRACK, {"reason": "branch_exhausted", "branch": branch})
        if self.depth_cuts and not self.answers_judged:
            return Status.DEPTH_EXHAUSTED, None, None
        return Status.EXHAUSTED, None, None

    def run_branch(self, branch: int, entity: str) -> tuple[str, Trajectory] | None:
        seed = Node(self.new_id(), branch, 0, None, f"Start from entity {entity}", self.env.seed_action(entity))
        self.emit(EventKind.GENERATE, {"node": seed.to_dict(), "seed": True})
        if not seed.action.is_finish:
            seed = self.execute(seed, ())
        self.paths[seed.id] = Trajectory((seed,))
        if seed.action.is_finish:
            self.answers[seed.id] = seed.action.payload
        stack: list[list[Node]] = [[seed]]
        expanded_per_layer: Counter[int] = Counter()
        self.branch_nodes = [seed]

        while (node := next_node(stack)) is not None:
            traj = self.paths[node.id]
            if node.id in self.answers:
                if self.check_answer(node, traj):
                    return self.answers[node.id], traj
                continue
            if node.depth >= self.cfg.max_depth:
                self.depth_cuts += 1
                self.emit(EventKind.BACKTRACK, {"reason": "max_depth", "node_id": node.id})
                continue
            # Each layer of a branch is expanded at most k times.
            if node.depth > 0 and expanded_per_layer[node.depth] >= self.cfg.k:
                self.emit(EventKind.BACKTRACK, {"reason": "layer_quota", "node_id": node.id})
                continue
            expanded_per_layer[node.depth] += 1
            self.ctx.stats.expansions += 1
            frontier = self.expand(node, traj)
            if not frontier:
                self.emit(EventKind.BACKTRACK, {"reason": "dead_end", "node_id": node.id})
            stack.append(frontier)

        for n in self.branch_nodes:
            self.by_depth[n.depth].append(n)
        return None

    def expand(self, node: Node, traj: Trajectory) -> list[Node]:
        extra = self.by_depth.get(node.depth + 1, []) if self.cfg.cross_branch_siblings else []
        try:
            children = self.generate(
                self.question,
                traj,
                tuple(self.errors),
                self.cfg.k,
                self.ctx,
                observe=lambda c: self.execute(c, traj.nodes),
                new_id=self.new_id,
                extra_siblings=tuple(extra),
            )
        except AllCandidatesFailed:
            return []
        for c in children:
            if c.action.is_finish:
                self.answers[c.id] = c.action.payload
        if self.cfg.step_eval_enabled:
            judged = []
            for c in children:
                verdict = self.judge_step(self.question, traj.extend(c), self.ctx)
                c = c.with_verdict(verdict)
                self.emit(
                    EventKind.STEP_EVAL,
                    {"node_id": c.id, "verdict": verdict.to_dict(), "fail_open": verdict.rationale == UNPARSEABLE_STEP},
                )
                judged.append(c)
            children = judged
        for c in children:
            self.paths[c.id] = traj.extend(c)
        self.branch_nodes.extend(children)
        return rank_frontier(children) if self.cfg.step_eval_enabled else list(children)

    def check_answer(self, node: Node, traj: Trajectory) -> bool:
        answer = self.answers[node.id]
        if not self.cfg.answer_eval_enabled:
            self.emit(
                EventKind.ANSWER_EVAL,
                {"node_id": node.id, "answer": answer, "verdict": AnswerVerdict(True, "answer evaluation disabled").to_dict(), "skipped": True},
            )
            return True
        self.answers_judged += 1
        verdict = self.judge_answer(self.question, answer, traj, self.ctx)
        self.emit(EventKind.ANSWER_EVAL, {"node_id": node.id, "answer": answer, "verdict": verdict.to_dict()})
        if verdict.on_topic:
            return True
        record = ErrorRecord(node.branch, answer, verdict.rationale, traj.digest())
        self.errors.append(record)
        self.emit(EventKind.ERROR_RECORD, {"record": record.to_dict(), "index": len(self.errors) - 1})
        self.emit(EventKind.BACKTRACK, {"reason": "answer_rejected", "node_id": node.id})
        return False


def solve(
    question: Question,
    environment: Environment,
    gateway: Gateway,
    config: SearchConfig | dict | None = None,
    *,
    generate: Callable | None = None,
    judge_step: StepJudge | None = None,
    judge_answer: AnswerJudge | None = None,
    trace: Trace | None = None,
) -> SearchOutcome:
    """Search for an accepted answer to ``question``.

    Branches follow the extracted entities in order. Inside a branch the
    search is depth-first over ranked frontiers; a rejected answer becomes an
    :class:`ErrorRecord` seen by every later generation, and the search resumes
    from the deepest frontier that still has nodes.

    The hooks replace the model-backed generator and judges, e.g. with the
    Game of 24 enumerator and exact checker.

    Events go to ``trace`` (a fresh one if omitted; use
    :func:`solve_with_trace` to get it back). Environment and transport
    failures propagate with the partial trace attached as ``exc.trace``.
    """
    cfg = validate_config(config)
    ctx = RunContext(gateway, cfg, trace)
    search = _Search(
        question,
        environment,
        ctx,
        generate or generate_children,
        judge_step or _llm_step_judge,
        judge_answer or _llm_answer_judge,
    )
    start = time.perf_counter()
    try:
        status, answer, accepted = search.run()
    except BudgetExceeded:
        status, answer, accepted = Status.BUDGET_EXCEEDED, None, None
    except Exception as exc:
        exc.trace = ctx.trace
        raise
    ctx.stats.wall_time_ms = 0 if ctx.trace.deterministic else int((time.perf_counter() - start) * 1000)
    outcome = SearchOutcome(status, answer, accepted, tuple(search.errors), ctx.stats)
    ctx.trace.emit(EventKind.FINAL, {"question_id": question.id, "outcome": outcome.to_dict()})
    return outcome


def solve_with_trace(question: Question, environment: Environment, gateway: Gateway, config=None, **hooks) -> tuple[SearchOutcome, Trace]:
    """:func:`solve` with a trace that is deterministic when replaying."""
    trace = Trace(deterministic=gateway.mode is Mode.REPLAY)
    return solve(question, environment, gateway, config, trace=trace, **hooks), trace
