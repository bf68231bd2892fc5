"""Domain types, search configuration and the trace event stream.

Every type here is a frozen dataclass with a ``to_dict``/``from_dict`` pair so
traces, cassettes and reports share one JSON vocabulary.
"""

from __future__ import annotations

import dataclasses
import json
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, TextIO

TRACE_SCHEMA = "branchsearch.trace/1"
OBS_DIGEST_CHARS = 300


class SearchError(Exception):
    """Base class for errors raised by this package."""

    code = "search_error"


class InvalidConfig(SearchError, ValueError):
    code = "invalid_config"

    def __init__(self, field_name: str, message: str = ""):
        self.field = field_name
        super().__init__(f"invalid_config({field_name}){': ' + message if message else ''}")


class InvalidStructure(SearchError, ValueError):
    """A node, trajectory or other value violates its invariants."""

    code = "invalid_structure"


# ---------------------------------------------------------------------------
# Questions and entities


class Dataset(str, Enum):
    HOTPOTQA = "hotpotqa"
    STRATEGYQA = "strategyqa"
    GAME24 = "game24"
    CUSTOM = "custom"


class Difficulty(str, Enum):
    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    gold_answer: str | None = None
    difficulty: Difficulty | None = None
    dataset: Dataset = Dataset.CUSTOM

    def __post_init__(self):
        if not self.text.strip():
            raise InvalidStructure("question text is empty")
        object.__setattr__(self, "dataset", Dataset(self.dataset))
        if self.difficulty is not None:
            object.__setattr__(self, "difficulty", Difficulty(self.difficulty))
            if self.dataset is not Dataset.HOTPOTQA:
                raise InvalidStructure("difficulty is only defined for hotpotqa questions")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "gold_answer": self.gold_answer,
            "difficulty": self.difficulty.value if self.difficulty else None,
            "dataset": self.dataset.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Question":
        return cls(
            id=data["id"],
            text=data["text"],
            gold_answer=data.get("gold_answer"),
            difficulty=data.get("difficulty"),
            dataset=data.get("dataset", "custom"),
        )


@dataclass(frozen=True)
class Entity:
    surface: str

    def __post_init__(self):
        if not self.surface.strip():
            raise InvalidStructure("entity surface is empty")


def dedupe_entities(surfaces: Iterable[str]) -> list[Entity]:
    """Keep the first occurrence of each case-insensitively distinct surface."""
    seen: set[str] = set()
    out = []
    for s in surfaces:
        s = s.strip()
        if not s or s.casefold() in seen:
            continue
        seen.add(s.casefold())
        out.append(Entity(s))
    return out


# ---------------------------------------------------------------------------
# Actions


class ActionKind(str, Enum):
    SEARCH = "search"
    LOOKUP = "lookup"
    FINISH = "finish"
    PROPOSE = "propose"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    payload: str

    def __post_init__(self):
        object.__setattr__(self, "kind", ActionKind(self.kind))
        if not self.payload.strip():
            raise InvalidStructure(f"{self.kind.value} action has an empty payload")

    @property
    def is_finish(self) -> bool:
        return self.kind is ActionKind.FINISH

    def __str__(self) -> str:
        return f"{self.kind.value.capitalize()}[{self.payload}]"

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "payload": self.payload}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Action":
        return cls(ActionKind(data["kind"]), data["payload"])


def Search(query: str) -> Action:
    return Action(ActionKind.SEARCH, query)


def Lookup(keyword: str) -> Action:
    return Action(ActionKind.LOOKUP, keyword)


def Finish(answer: str) -> Action:
    return Action(ActionKind.FINISH, answer)


def Propose(expression: str) -> Action:
    return Action(ActionKind.PROPOSE, expression)


# ---------------------------------------------------------------------------
# Verdicts


class Category(str, Enum):
    SURE = "sure"
    MAYBE = "maybe"
    IMPOSSIBLE = "impossible"


@dataclass(frozen=True)
class FeasibilityVerdict:
    category: Category
    rationale: str

    def __post_init__(self):
        object.__setattr__(self, "category", Category(self.category))
        if not self.rationale.strip():
            raise InvalidStructure("feasibility verdict needs a rationale")

    def to_dict(self) -> dict:
        return {"category": self.category.value, "rationale": self.rationale}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FeasibilityVerdict":
        return cls(Category(data["category"]), data["rationale"])


@dataclass(frozen=True)
class AnswerVerdict:
    on_topic: bool
    rationale: str = ""

    def to_dict(self) -> dict:
        return {"on_topic": self.on_topic, "rationale": self.rationale}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AnswerVerdict":
        return cls(bool(data["on_topic"]), data.get("rationale", ""))


# ---------------------------------------------------------------------------
# Nodes and trajectories


@dataclass(frozen=True)
class Node:
    id: int
    branch: int
    depth: int
    parent: int | None
    thought: str
    action: Action
    observation: str | None = None
    verdict: FeasibilityVerdict | None = None

    @property
    def executed(self) -> bool:
        return self.observation is not None

    def with_observation(self, observation: str) -> "Node":
        return dataclasses.replace(self, observation=observation)

    def with_verdict(self, verdict: FeasibilityVerdict) -> "Node":
        return dataclasses.replace(self, verdict=verdict)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "branch": self.branch,
            "depth": self.depth,
            "parent": self.parent,
            "thought": self.thought,
            "action": self.action.to_dict(),
            "observation": self.observation,
            "verdict": self.verdict.to_dict() if self.verdict else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Node":
        return cls(
            id=data["id"],
            branch=data["branch"],
            depth=data["depth"],
            parent=data.get("parent"),
            thought=data["thought"],
            action=Action.from_dict(data["action"]),
            observation=data.get("observation"),
            verdict=FeasibilityVerdict.from_dict(data["verdict"]) if data.get("verdict") else None,
        )


@dataclass(frozen=True)
class Trajectory:
    nodes: tuple[Node, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    @property
    def tail(self) -> Node:
        return self.nodes[-1]

    def extend(self, node: Node) -> "Trajectory":
        return Trajectory(self.nodes + (node,))

    def digest(self, obs_chars: int = OBS_DIGEST_CHARS) -> str:
        """Bounded textual summary: Thought/Action/Obs lines per node."""
        lines = []
        for n in self.nodes:
            lines.append(f"Thought: {n.thought}")
            lines.append(f"Action: {n.action}")
            if n.observation is not None:
                lines.append(f"Obs: {n.observation[:obs_chars]}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {"nodes": [n.to_dict() for n in self.nodes]}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Trajectory":
        return cls(tuple(Node.from_dict(n) for n in data["nodes"]))


def validate_node(node: Node, parent: Node | None = None) -> None:
    """Raise :class:`InvalidStructure` if ``node`` breaks a structural invariant."""
    if node.depth < 0 or node.branch < 0:
        raise InvalidStructure(f"node {node.id}: negative depth or branch")
    if parent is None:
        if node.parent is not None and node.depth == 0:
            raise InvalidStructure(f"node {node.id}: layer-0 node with a parent")
        return
    if node.parent != parent.id:
        raise InvalidStructure(f"node {node.id}: parent id {node.parent} != {parent.id}")
    if node.depth != parent.depth + 1:
        raise InvalidStructure(f"node {node.id}: depth {node.depth} under parent depth {parent.depth}")
    if node.branch != parent.branch:
        raise InvalidStructure(f"node {node.id}: branch {node.branch} under parent branch {parent.branch}")
    if parent.action.is_finish:
        raise InvalidStructure(f"node {node.id}: child of a Finish node")
    if parent.verdict is not None and parent.verdict.category is Category.IMPOSSIBLE:
        raise InvalidStructure(f"node {node.id}: child of an impossible node")


def validate_trajectory(traj: Trajectory) -> None:
    nodes = traj.nodes
    if not nodes:
        return
    if nodes[0].depth != 0 or nodes[0].parent is not None:
        raise InvalidStructure("trajectory must start at a layer-0 node")
    validate_node(nodes[0])
    for parent, child in zip(nodes, nodes[1:]):
        validate_node(child, parent)


# ---------------------------------------------------------------------------
# Errors, outcomes


@dataclass(frozen=True)
class ErrorRecord:
    branch: int
    rejected_answer: str
    rationale: str
    trajectory_digest: str

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ErrorRecord":
        return cls(data["branch"], data["rejected_answer"], data["rationale"], data["trajectory_digest"])


class Status(str, Enum):
    SOLVED = "solved"
    EXHAUSTED = "exhausted"
    BUDGET_EXCEEDED = "budget_exceeded"
    DEPTH_EXHAUSTED = "depth_exhausted"


@dataclass
class RunStats:
    llm_calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    tool_calls: int = 0
    wall_time_ms: int = 0
    expansions: int = 0

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunStats":
        return cls(**{f.name: data.get(f.name, 0) for f in dataclasses.fields(cls)})


@dataclass(frozen=True)
class SearchOutcome:
    status: Status
    answer: str | None
    accepted_trajectory: Trajectory | None
    errors: tuple[ErrorRecord, ...]
    stats: RunStats

    def __post_init__(self):
        object.__setattr__(self, "status", Status(self.status))
        object.__setattr__(self, "errors", tuple(self.errors))
        if (self.status is Status.SOLVED) != (self.answer is not None):
            raise InvalidStructure("answer must be present iff status is solved")

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "answer": self.answer,
            "accepted_trajectory": self.accepted_trajectory.to_dict() if self.accepted_trajectory else None,
            "errors": [e.to_dict() for e in self.errors],
            "stats": self.stats.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SearchOutcome":
        traj = data.get("accepted_trajectory")
        return cls(
            status=Status(data["status"]),
            answer=data.get("answer"),
            accepted_trajectory=Trajectory.from_dict(traj) if traj else None,
            errors=tuple(ErrorRecord.from_dict(e) for e in data.get("errors", [])),
            stats=RunStats.from_dict(data.get("stats", {})),
        )


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class SearchConfig:
    k: int = 3
    max_depth: int = 8
    max_branches: int | None = None
    temperature: float = 0.7
    llm_call_budget: int = 60
    retries: int = 2
    extractor_enabled: bool = True
    step_eval_enabled: bool = True
    answer_eval_enabled: bool = True
    # False: siblings are only the candidates of the current expansion.
    cross_branch_siblings: bool = False

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_INT_MIN = {"k": 1, "max_depth": 1, "llm_call_budget": 1, "retries": 0}
_BOOL_FIELDS = ("extractor_enabled", "step_eval_enabled", "answer_eval_enabled", "cross_branch_siblings")


def validate_config(config: SearchConfig | Mapping[str, Any] | None = None) -> SearchConfig:
    """Fill defaults and check every field; raises :class:`InvalidConfig`."""
    if config is None:
        config = {}
    if isinstance(config, SearchConfig):
        config = config.to_dict()
    known = {f.name for f in dataclasses.fields(SearchConfig)}
    for name in config:
        if name not in known:
            raise InvalidConfig(name, "unknown field")
    merged = {**SearchConfig().to_dict(), **config}

    for name, lo in _INT_MIN.items():
        v = merged[name]
        if isinstance(v, bool) or not isinstance(v, int) or v < lo:
            raise InvalidConfig(name, f"must be an integer >= {lo}")
    mb = merged["max_branches"]
    if mb is not None and (isinstance(mb, bool) or not isinstance(mb, int) or mb < 1):
        raise InvalidConfig("max_branches", "must be null or an integer >= 1")
    t = merged["temperature"]
    if isinstance(t, bool) or not isinstance(t, (int, float)) or not 0 <= t <= 2:
        raise InvalidConfig("temperature", "must be a number in [0, 2]")
    merged["temperature"] = float(t)
    for name in _BOOL_FIELDS:
        if not isinstance(merged[name], bool):
            raise InvalidConfig(name, "must be a boolean")
    return SearchConfig(**merged)


# ---------------------------------------------------------------------------
# Trace events


class EventKind(str, Enum):
    EXTRACT = "extract"
    GENERATE = "generate"
    STEP_EVAL = "step_eval"
    TOOL_EXEC = "tool_exec"
    ANSWER_EVAL = "answer_eval"
    BACKTRACK = "backtrack"
    ERROR_RECORD = "error_record"
    FINAL = "final"


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    kind: EventKind
    payload: dict
    timestamp: float

    def to_dict(self) -> dict:
        return {"seq": self.seq, "kind": EventKind(self.kind).value, "payload": self.payload, "timestamp": self.timestamp}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TraceEvent":
        return cls(int(data["seq"]), EventKind(data["kind"]), dict(data["payload"]), float(data["timestamp"]))


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


class Trace:
    """In-memory event stream for one solve run.

    With ``deterministic=True`` every timestamp is zero so replayed runs
    serialize byte-identically.
    """

    def __init__(self, deterministic: bool = False, clock=time.time):
        self.deterministic = deterministic
        self._clock = clock
        self._lock = threading.Lock()
        self.events: list[TraceEvent] = []

    def emit(self, kind: EventKind | str, payload: dict) -> TraceEvent:
        with self._lock:
            ev = TraceEvent(
                seq=len(self.events),
                kind=EventKind(kind),
                payload=payload,
                timestamp=0.0 if self.deterministic else self._clock(),
            )
            self.events.append(ev)
        return ev

    def of_kind(self, kind: EventKind | str) -> list[TraceEvent]:
        kind = EventKind(kind)
        return [e for e in self.events if e.kind is kind]

    def dumps(self) -> str:
        lines = [_dumps({"schema": TRACE_SCHEMA})]
        lines.extend(_dumps(e.to_dict()) for e in self.events)
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps(), encoding="utf-8")
        return path


class TraceFormatError(SearchError, ValueError):
    code = "malformed_trace"

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


def read_trace(source: str | Path | TextIO) -> list[TraceEvent]:
    """Parse a trace file, checking the header and seq continuity."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise TraceFormatError(1, "empty trace")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise TraceFormatError(1, f"header is not JSON ({exc.msg})") from None
    if not isinstance(header, dict) or header.get("schema") != TRACE_SCHEMA:
        raise TraceFormatError(1, f"missing schema header {TRACE_SCHEMA!r}")
    events: list[TraceEvent] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            ev = TraceEvent.from_dict(json.loads(line))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise TraceFormatError(lineno, f"malformed event ({exc})") from None
        expected = events[-1].seq + 1 if events else 0
        if ev.seq != expected:
            raise TraceFormatError(lineno, f"seq gap: expected {expected}, got {ev.seq}")
        events.append(ev)
    return events


def nodes_from_events(events: Sequence[TraceEvent]) -> dict[int, Node]:
    """Rebuild the final state of every node mentioned by a trace."""
    nodes: dict[int, Node] = {}
    for ev in events:
        p = ev.payload
        if ev.kind is EventKind.GENERATE and "node" in p:
            n = Node.from_dict(p["node"])
            nodes[n.id] = n
        elif ev.kind is EventKind.TOOL_EXEC and p.get("node_id") in nodes:
            nodes[p["node_id"]] = nodes[p["node_id"]].with_observation(p["observation"])
        elif ev.kind is EventKind.STEP_EVAL and p.get("node_id") in nodes:
            nodes[p["node_id"]] = nodes[p["node_id"]].with_verdict(FeasibilityVerdict.from_dict(p["verdict"]))
    return nodes
