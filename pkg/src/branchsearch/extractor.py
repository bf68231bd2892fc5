"""Seed-entity extraction: each extracted entity roots one search branch."""

from __future__ import annotations

import json
import re

from .context import ParseError, RunContext, as_context
from .core import Entity, Question, SearchConfig, dedupe_entities
from .gateway import Gateway
from .prompts import extraction_request

_STR = r'"(?:[^"\\\n]|\\.)*"'
_LIST_RE = re.compile(r"\[\s*(?:" + _STR + r"(?:\s*,\s*" + _STR + r")*)?\s*,?\s*\]")


def parse_entity_list(raw: str) -> list[Entity]:
    """Return the first ``["A", "B", ...]`` list found in ``raw``.

    Surrounding prose is ignored. Raises :class:`ParseError` with code
    ``no_list_found`` or ``empty_list``.
    """
    if not isinstance(raw, str):
        raise ParseError("no_list_found", "input is not text")
    for m in _LIST_RE.finditer(raw):
        try:
            items = json.loads(re.sub(r",\s*\]$", "]", m.group(0)))
        except json.JSONDecodeError:
            # e.g. an escape sequence JSON rejects
            continue
        entities = dedupe_entities(s for s in items if isinstance(s, str))
        if not entities:
            raise ParseError("empty_list")
        return entities
    raise ParseError("no_list_found")


def synthetic_entity(question: Question) -> Entity:
    return Entity(question.text.strip())


def extract_entities(question: Question, gateway: Gateway | RunContext, config: SearchConfig | None = None) -> list[Entity]:
    """Ask the model for seed entities, re-prompting on malformed output.

    With the extractor disabled the whole question text is the single seed.
    Raises :class:`ParseError` (``extraction_parse_failure``) once retries are spent.
    """
    ctx = as_context(gateway, config)
    cfg = ctx.config
    if not cfg.extractor_enabled:
        return [synthetic_entity(question)]
    req = extraction_request(question, cfg.temperature, ctx.model)
    try:
        entities = ctx.call_parsed(req, parse_entity_list, 'reply with a list like ["Entity A", "Entity B"]')
    except ParseError as exc:
        raise ParseError("extraction_parse_failure", str(exc)) from exc
    if cfg.max_branches is not None:
        entities = entities[: cfg.max_branches]
    return entities
