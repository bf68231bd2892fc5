"""Child-node generation conditioned on errors, siblings and the branch prefix."""

from __future__ import annotations

import itertools
import re
from typing import Callable, Iterator, Sequence

from .context import ParseError, RunContext, as_context
from .core import (
    Action,
    ActionKind,
    ErrorRecord,
    EventKind,
    Node,
    Question,
    SearchConfig,
    SearchError,
    Trajectory,
)
from .gateway import Gateway
from .prompts import generation_request


class AllCandidatesFailed(SearchError):
    code = "all_candidates_failed"


_LABEL = r"^[ \t]*(?:\*\*)?{}(?:[ \t]*\d+)?(?:\*\*)?[ \t]*:(?:\*\*)?"
_THOUGHT_RE = re.compile(_LABEL.format("thought"), re.IGNORECASE | re.MULTILINE)
_ACTION_RE = re.compile(_LABEL.format("action"), re.IGNORECASE | re.MULTILINE)
_STOP_RE = re.compile(_LABEL.format("(?:thought|action|obs|observation)"), re.IGNORECASE | re.MULTILINE)
_ACTION_BODY_RE = re.compile(r"^\s*(\w+)\s*\[(.*)\]", re.DOTALL)
_VERBS = {k.value: k for k in ActionKind}


def parse_action(text: str) -> Action:
    """Parse ``Verb[payload]`` with a case-insensitive verb."""
    m = _ACTION_BODY_RE.match(text)
    if not m:
        raise ParseError("missing_action", f"no Verb[payload] in {text[:60]!r}")
    verb, payload = m.group(1).lower(), m.group(2).strip()
    if verb not in _VERBS:
        raise ParseError("unknown_action_verb", verb)
    if not payload:
        raise ParseError("empty_payload", verb)
    return Action(_VERBS[verb], payload)


def parse_node_block(raw: str) -> tuple[str, Action]:
    """Extract the first ``Thought:`` block and the first ``Action:`` line.

    Raises :class:`ParseError` with code ``missing_thought``,
    ``missing_action``, ``unknown_action_verb`` or ``empty_payload``.
    """
    if not isinstance(raw, str):
        raise ParseError("missing_thought", "input is not text")
    tm = _THOUGHT_RE.search(raw)
    if tm is None:
        raise ParseError("missing_thought")
    stop = _STOP_RE.search(raw, tm.end())
    thought = " ".join(raw[tm.end() : stop.start() if stop else len(raw)].split())
    if not thought:
        raise ParseError("missing_thought", "empty thought")
    am = _ACTION_RE.search(raw)
    if am is None:
        raise ParseError("missing_action")
    line = raw[am.end() :].split("\n", 1)[0]
    # Accept a closing bracket that only appears on the next line.
    if "[" in line and "]" not in line:
        line = raw[am.end() :]
        line = line[: line.find("]") + 1] if "]" in line else line
    return thought, parse_action(line.strip())


def _dedup_key(thought: str, action: Action) -> tuple[str, str, str]:
    return (" ".join(thought.split()), action.kind.value, " ".join(action.payload.split()))


def generate_children(
    question: Question,
    prefix: Trajectory,
    errors: Sequence[ErrorRecord],
    k: int,
    gateway: Gateway | RunContext,
    config: SearchConfig | None = None,
    *,
    observe: Callable[[Node], Node] | None = None,
    new_id: Callable[[], int] | None = None,
    extra_siblings: Sequence[Node] = (),
) -> list[Node]:
    """Sample up to ``k`` children of ``prefix.tail``, one completion per slot.

    The prompt for slot m shows the m-1 children accepted so far in this
    expansion (plus ``extra_siblings`` when cross-branch sibling feedback is
    on) and every record in ``errors``. ``observe`` executes a non-Finish
    child right away so later slots see its observation. Exact duplicates
    are dropped without a retry; slots whose reply never parses are skipped.

    Raises:
        AllCandidatesFailed: no slot produced a usable child.
    """
    ctx = as_context(gateway, config)
    cfg = ctx.config
    if not prefix.nodes:
        raise ValueError("cannot expand an empty trajectory")
    parent = prefix.tail
    if parent.action.is_finish:
        raise ValueError("a Finish node has no children")
    if parent.depth >= cfg.max_depth:
        raise ValueError(f"parent depth {parent.depth} already at max_depth {cfg.max_depth}")
    if new_id is None:
        counter: Iterator[int] = itertools.count(parent.id + 1)
        new_id = lambda: next(counter)  # noqa: E731

    children: list[Node] = []
    seen: set[tuple[str, str, str]] = set()
    for slot in range(k):
        req = generation_request(question, prefix, errors, [*extra_siblings, *children], cfg.temperature, ctx.model)
        try:
            thought, action = ctx.call_parsed(req, parse_node_block, "write 'Thought: ...' then 'Action: Verb[payload]'")
        except ParseError as exc:
            ctx.trace.emit(EventKind.GENERATE, {"parent": parent.id, "slot": slot, "failed": exc.code})
            continue
        key = _dedup_key(thought, action)
        if key in seen:
            ctx.trace.emit(EventKind.GENERATE, {"parent": parent.id, "slot": slot, "discarded": "duplicate"})
            continue
        seen.add(key)
        node = Node(
            id=new_id(),
            branch=parent.branch,
            depth=parent.depth + 1,
            parent=parent.id,
            thought=thought,
            action=action,
        )
        ctx.trace.emit(EventKind.GENERATE, {"node": node.to_dict(), "slot": slot})
        if observe is not None and not action.is_finish:
            node = observe(node)
        children.append(node)
    if not children:
        raise AllCandidatesFailed(f"expansion of node {parent.id} produced no usable child")
    return children
