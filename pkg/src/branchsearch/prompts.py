"""Prompt templates (versioned text assets) and the message builders around them."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Sequence

from .core import Dataset, ErrorRecord, Node, Question, Trajectory
from .gateway import ChatMessage, ChatRequest

TEMPLATE_VERSION = "1"
TEMPLATES = ("extract_entities", "evaluate_answer", "evaluate_step", "generate_node")


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return resources.files("branchsearch.assets").joinpath(f"{name}.txt").read_text(encoding="utf-8").rstrip("\n")


def template_fingerprint(name: str) -> str:
    return hashlib.sha256(load_template(name).encode("utf-8")).hexdigest()[:16]


def react_instructions(dataset: Dataset | str) -> str:
    dataset = Dataset(dataset)
    name = {Dataset.STRATEGYQA: "react_strategyqa", Dataset.GAME24: "react_game24"}.get(dataset, "react_hotpotqa")
    return load_template(name)


@dataclass(frozen=True)
class _GenerationParts:
    error_header: str
    error_item: str
    sibling_header: str
    sibling_list_header: str
    sibling_item: str


@lru_cache(maxsize=None)
def _generation_parts() -> _GenerationParts:
    paras = [p.strip() for p in load_template("generate_node").split("\n\n")]
    # Paragraph layout of the asset: error header, error item, "...", sibling
    # header, "Existing nodes:", sibling item.
    return _GenerationParts(paras[0], paras[1], paras[3], paras[4], paras[5])


def render_trajectory(traj: Trajectory | Sequence[Node]) -> str:
    lines = []
    for n in traj:
        lines.append(f"Thought: {n.thought}")
        lines.append(f"Action: {n.action}")
        if n.observation is not None:
            lines.append(f"Obs: {n.observation}")
    return "\n".join(lines)


def render_errors(errors: Sequence[ErrorRecord]) -> str:
    parts = _generation_parts()
    items = []
    for e in errors:
        item = parts.error_item.replace("{error results}", e.rejected_answer).replace("{thought}", e.rationale)
        if e.trajectory_digest:
            item += "\nTrajectory:\n" + e.trajectory_digest
        items.append(item)
    return parts.error_header + "\n\n" + "\n\n".join(items)


def render_sibling(node: Node) -> str:
    obs = node.observation if node.observation is not None else "(not executed)"
    item = _generation_parts().sibling_item
    return item.replace("{thought}", node.thought).replace("{action}", str(node.action)).replace("{observation}", obs)


def render_siblings(siblings: Sequence[Node]) -> str:
    parts = _generation_parts()
    body = "\n\n".join(render_sibling(s) for s in siblings)
    return f"{parts.sibling_header}\n\n{parts.sibling_list_header}\n\n{body}"


# ---------------------------------------------------------------------------
# Request builders. Each prompt kind uses its template as the system message,
# which also lets scripted backends tell the kinds apart.


def _request(system: str, user: str, temperature: float, model: str) -> ChatRequest:
    return ChatRequest((ChatMessage("system", system), ChatMessage("user", user)), temperature, model)


def extraction_request(question: Question, temperature: float, model: str) -> ChatRequest:
    return _request(load_template("extract_entities"), f"Question: {question.text}\n", temperature, model)


def generation_request(
    question: Question,
    prefix: Trajectory,
    errors: Sequence[ErrorRecord],
    siblings: Sequence[Node],
    temperature: float,
    model: str,
) -> ChatRequest:
    sections = [f"Question: {question.text}", render_trajectory(prefix)]
    if errors:
        sections.append(render_errors(errors))
    if siblings:
        sections.append(render_siblings(siblings))
    sections.append("Write the next step as a Thought line followed by an Action line.")
    return _request(react_instructions(question.dataset), "\n\n".join(sections), temperature, model)


def step_eval_request(question: Question, trajectory: Trajectory, temperature: float, model: str) -> ChatRequest:
    *history, new = trajectory.nodes
    new_step = f"Thought: {new.thought}\nAction: {new.action}"
    if new.observation is not None:
        new_step += f"\nObs: {new.observation}"
    user = (
        f"QUESTION: {question.text}\nTRAJECTORY:\n{render_trajectory(history)}\n"
        f"NEW STEP:\n{new_step}\n"
    )
    return _request(load_template("evaluate_step"), user, temperature, model)


def answer_eval_request(question: Question, answer: str, temperature: float, model: str) -> ChatRequest:
    return _request(load_template("evaluate_answer"), f"Question: {question.text}\nGet_answer: {answer}\n", temperature, model)


def correction_request(request: ChatRequest, bad_reply: str, hint: str) -> ChatRequest:
    """Re-prompt after an unparseable reply: echo it and restate the format."""
    msgs = request.messages + (
        ChatMessage("assistant", bad_reply),
        ChatMessage("user", f"Your reply could not be parsed ({hint}). Answer again using exactly the requested format."),
    )
    return ChatRequest(msgs, request.temperature, request.model)


def prompt_kind(request: ChatRequest) -> str:
    """Classify a request as extract / generate / step_eval / answer_eval."""
    system = request.messages[0].content if request.messages[0].role == "system" else ""
    if system == load_template("extract_entities"):
        return "extract"
    if system == load_template("evaluate_answer"):
        return "answer_eval"
    if system == load_template("evaluate_step"):
        return "step_eval"
    return "generate"
