from __future__ import annotations

from typing import Protocol, Sequence

from ..core import Action, Node, SearchError


class ActionError(SearchError):
    """The agent issued an action the environment cannot carry out.

    These are model mistakes, reported back to the model as an observation.
    """

    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}{': ' + message if message else ''}")


class EnvironmentFailure(SearchError):
    code = "environment_failure"


class Session(Protocol):
    terminal: bool
    final_answer: str | None

    def step(self, action: Action) -> str: ...


class Environment(Protocol):
    def seed_action(self, entity: str) -> Action: ...

    def new_session(self) -> Session: ...


def replay_session(env: Environment, path: Sequence[Node]) -> Session:
    """Fresh session with every executed action of ``path`` re-applied.

    Sessions are cheap and local, so DFS re-derives the state of each path
    instead of sharing one mutable session across branches.
    """
    session = env.new_session()
    for node in path:
        if node.observation is None:
            continue
        try:
            session.step(node.action)
        except ActionError:
            pass
    return session
