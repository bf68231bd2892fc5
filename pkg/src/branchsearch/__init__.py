"""Entity-seeded depth-first agent search with error memory and sibling feedback."""

from .core import (
    Action,
    AnswerVerdict,
    Category,
    Dataset,
    Entity,
    ErrorRecord,
    FeasibilityVerdict,
    Node,
    Question,
    SearchConfig,
    SearchOutcome,
    Status,
    Trace,
    TraceEvent,
    Trajectory,
    validate_config,
)
from .evaluators import evaluate_answer, evaluate_step, parse_judgment, rank_frontier
from .explorer import next_node, solve, solve_with_trace
from .extractor import extract_entities, parse_entity_list
from .gateway import Cassette, ChatExchange, Gateway, HttpBackend, Mode, ScriptedBackend, canonical_digest
from .generator import generate_children, parse_node_block

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AnswerVerdict",
    "Cassette",
    "Category",
    "ChatExchange",
    "Dataset",
    "Entity",
    "ErrorRecord",
    "FeasibilityVerdict",
    "Gateway",
    "HttpBackend",
    "Mode",
    "Node",
    "Question",
    "ScriptedBackend",
    "SearchConfig",
    "SearchOutcome",
    "Status",
    "Trace",
    "TraceEvent",
    "Trajectory",
    "canonical_digest",
    "evaluate_answer",
    "evaluate_step",
    "extract_entities",
    "generate_children",
    "next_node",
    "parse_entity_list",
    "parse_judgment",
    "parse_node_block",
    "rank_frontier",
    "solve",
    "solve_with_trace",
    "validate_config",
]
