from .base import ActionError, Environment, EnvironmentFailure, Session, replay_session
from .game24 import (
    Game24Environment,
    Game24State,
    game24_apply,
    game24_brute_force,
    game24_candidate_moves,
    game24_enumerate_children,
    game24_solved,
)
from .wiki import Corpus, CorpusDoc, WikiEnvironment, WikiSession, wiki_step

__all__ = [
    "ActionError",
    "Corpus",
    "CorpusDoc",
    "Environment",
    "EnvironmentFailure",
    "Game24Environment",
    "Game24State",
    "Session",
    "WikiEnvironment",
    "WikiSession",
    "game24_apply",
    "game24_brute_force",
    "game24_candidate_moves",
    "game24_enumerate_children",
    "game24_solved",
    "replay_session",
    "wiki_step",
]
