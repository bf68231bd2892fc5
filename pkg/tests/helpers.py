"""Shared test doubles: a trivial environment and randomized scripted models."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

from branchsearch import Gateway, Question
from branchsearch.core import Action, ActionKind, Dataset, Search
from branchsearch.gateway import ChatRequest
from branchsearch.prompts import prompt_kind

ROOT_QUESTION = Question("t1", "Which company published both Bizarre and Fortean Times?", "Dennis Publishing", dataset=Dataset.HOTPOTQA)


class EchoSession:
    def __init__(self):
        self.terminal = False
        self.final_answer = None

    def step(self, action: Action) -> str:
        if action.kind is ActionKind.FINISH:
            self.terminal = True
            self.final_answer = action.payload
            return action.payload
        return f"Result for {action}"


class EchoEnvironment:
    """Every Search/Lookup succeeds with a canned observation."""

    def seed_action(self, entity: str) -> Action:
        return Search(entity)

    def new_session(self) -> EchoSession:
        return EchoSession()


def node_reply(thought: str, action: str) -> str:
    return f"Thought: {thought}\nAction: {action}"


@dataclass
class RandomModel:
    """Scripted model with seeded random replies for property tests.

    Step verdicts are drawn from ``categories``; answer judgments are YES with
    probability ``p_yes``; a generated step is a Finish with probability
    ``p_finish`` and repeats the previous reply with probability ``p_dup``.
    """

    seed: int
    n_entities: int = 2
    p_finish: float = 0.4
    p_yes: float = 0.0
    p_dup: float = 0.1
    categories: tuple = ("sure", "maybe", "impossible")
    rng: random.Random = field(init=False)
    counter: int = 0
    last_reply: str | None = None
    rationales: list = field(default_factory=list)

    def __post_init__(self):
        self.rng = random.Random(self.seed)

    def __call__(self, request: ChatRequest) -> str:
        kind = prompt_kind(request)
        if kind == "extract":
            return "[" + ", ".join(f'"Entity {i}"' for i in range(self.n_entities)) + "]"
        if kind == "step_eval":
            cat = self.rng.choice(self.categories)
            return f"ANALYSIS: judged {cat} at random ({self.rng.random():.6f})\nCATEGORY: {cat}"
        if kind == "answer_eval":
            yes = self.rng.random() < self.p_yes
            self.counter += 1
            why = f"rationale-{self.seed}-{self.counter} for the answer"
            self.rationales.append(why)
            return f"THOUGHT: {why}\nJUDGMENT: {'YES' if yes else 'NO'}"
        if self.last_reply is not None and self.rng.random() < self.p_dup:
            return self.last_reply
        self.counter += 1
        if self.rng.random() < self.p_finish:
            reply = node_reply(f"answer guess {self.counter}", f"Finish[answer {self.counter}]")
        else:
            reply = node_reply(f"look further {self.counter}", f"Search[topic {self.counter}]")
        self.last_reply = reply
        return reply


def scripted(responder) -> Gateway:
    return Gateway.scripted(responder, record=False)


_SIBLING_ACTION = re.compile(r"^Action: (.+)$", re.MULTILINE)


def sibling_actions(prompt_user: str, sibling_list_header: str) -> list[str]:
    """Actions listed after the sibling list header of a generation prompt."""
    i = prompt_user.find(sibling_list_header)
    if i == -1:
        return []
    section = prompt_user[i:]
    end = section.find("Write the next step")
    return _SIBLING_ACTION.findall(section[: end if end != -1 else None])


ROOT = __import__("pathlib").Path(__file__).resolve().parents[1]
PUBLISHER = ROOT / "data" / "publisher"


def load_scenario():
    """The scripted publisher-question scenario module in data/publisher."""
    import importlib.util

    module_spec = importlib.util.spec_from_file_location("publisher_scenario", PUBLISHER / "scenario.py")
    mod = importlib.util.module_from_spec(module_spec)
    module_spec.loader.exec_module(mod)
    return mod
