"""Local-corpus encyclopedia with Search / Lookup / Finish actions."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from ..core import Action, ActionKind, InvalidStructure, Search
from .base import ActionError

_WORD = re.compile(r"\w+")
_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")


def _tokens(text: str) -> set[str]:
    return set(_WORD.findall(text.lower()))


@dataclass(frozen=True)
class CorpusDoc:
    title: str
    paragraphs: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "paragraphs", tuple(self.paragraphs))
        if not self.title.strip():
            raise InvalidStructure("document title is empty")
        if not self.paragraphs:
            raise InvalidStructure(f"document {self.title!r} has no paragraphs")

    def sentences(self) -> list[str]:
        out = []
        for p in self.paragraphs:
            out.extend(s.strip() for s in _SENTENCE_END.split(p) if s.strip())
        return out


class Corpus:
    """Immutable title -> document map with case-insensitive lookup."""

    def __init__(self, docs: Sequence[CorpusDoc] = ()):
        self._docs: dict[str, CorpusDoc] = {}
        for d in docs:
            key = d.title.casefold()
            if key in self._docs:
                raise InvalidStructure(f"duplicate title {d.title!r}")
            self._docs[key] = d

    @classmethod
    def from_mapping(cls, data: Mapping[str, Sequence[str]]) -> "Corpus":
        return cls([CorpusDoc(t, tuple(ps)) for t, ps in data.items()])

    @classmethod
    def load(cls, path: str | Path) -> "Corpus":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise InvalidStructure("corpus file must be a JSON object of title -> paragraphs")
        return cls.from_mapping(data)

    def __len__(self) -> int:
        return len(self._docs)

    def __contains__(self, title: str) -> bool:
        return title.casefold() in self._docs

    def get(self, title: str) -> CorpusDoc | None:
        return self._docs.get(title.strip().casefold())

    @property
    def titles(self) -> list[str]:
        return [d.title for d in self._docs.values()]

    def similar(self, query: str, limit: int = 5) -> list[str]:
        """Titles sharing the most query tokens; ties broken alphabetically."""
        q = _tokens(query)
        scored = [(len(q & _tokens(t)), t) for t in self.titles]
        scored = [(s, t) for s, t in scored if s > 0]
        scored.sort(key=lambda st: (-st[0], st[1]))
        return [t for _, t in scored[:limit]]


class WikiSession:
    """Cursor state for one agent's walk over the corpus."""

    def __init__(self, corpus: Corpus, obs_chars: int | None = 1000):
        self.corpus = corpus
        self.obs_chars = obs_chars
        self.doc: CorpusDoc | None = None
        self._cursors: dict[str, int] = {}
        self.terminal = False
        self.final_answer: str | None = None

    def _clip(self, text: str) -> str:
        if self.obs_chars is None or len(text) <= self.obs_chars:
            return text
        return text[: self.obs_chars] + "..."

    def step(self, action: Action) -> str:
        if action.kind is ActionKind.SEARCH:
            return self._search(action.payload)
        if action.kind is ActionKind.LOOKUP:
            return self._lookup(action.payload)
        if action.kind is ActionKind.FINISH:
            self.terminal = True
            self.final_answer = action.payload
            return action.payload
        raise ActionError("unsupported_action", f"{action} is not available here")

    def _search(self, query: str) -> str:
        doc = self.corpus.get(query)
        if doc is None:
            return f"Could not find [{query}]. Similar: {self.corpus.similar(query)}."
        self.doc = doc
        self._cursors = {}
        return self._clip(doc.paragraphs[0])

    def _lookup(self, keyword: str) -> str:
        if self.doc is None:
            raise ActionError("lookup_before_search", "Lookup needs a successful Search first")
        key = keyword.lower()
        hits = [s for s in self.doc.sentences() if key in s.lower()]
        i = self._cursors.get(key, 0)
        if i >= len(hits):
            return "No more results."
        self._cursors[key] = i + 1
        return f"(Result {i + 1} / {len(hits)}) {self._clip(hits[i])}"


class WikiEnvironment:
    def __init__(self, corpus: Corpus, obs_chars: int | None = 1000):
        self.corpus = corpus
        self.obs_chars = obs_chars

    @classmethod
    def load(cls, path: str | Path, obs_chars: int | None = 1000) -> "WikiEnvironment":
        return cls(Corpus.load(path), obs_chars)

    def seed_action(self, entity: str) -> Action:
        return Search(entity)

    def new_session(self) -> WikiSession:
        return WikiSession(self.corpus, self.obs_chars)


def wiki_step(action: Action, session: WikiSession) -> str:
    return session.step(action)
