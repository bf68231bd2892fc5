"""Loaders for HotpotQA-, StrategyQA- and Game-of-24-format question files."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .core import Dataset, InvalidStructure, Question

log = logging.getLogger(__name__)


@dataclass
class LoadedDataset:
    questions: list[Question]
    kind: Dataset
    # (record index, reason) for every skipped record
    malformed: list[tuple[int, str]] = field(default_factory=list)

    def __iter__(self) -> Iterator[Question]:
        return iter(self.questions)

    def __len__(self) -> int:
        return len(self.questions)


def _records(path: Path) -> list:
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        return json.loads(text)
    if stripped.startswith("{") and "\n{" not in stripped:
        data = json.loads(text)
        return data.get("data", data.get("examples", [data])) if isinstance(data, dict) else data
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def _hotpot(i: int, rec: dict) -> Question:
    level = rec.get("level") or rec.get("difficulty")
    return Question(
        id=str(rec.get("_id") or rec.get("id") or rec.get("qid") or f"q{i}"),
        text=rec["question"],
        gold_answer=str(rec["answer"]),
        difficulty=level.lower() if isinstance(level, str) else None,
        dataset=Dataset.HOTPOTQA,
    )


def _strategy(i: int, rec: dict) -> Question:
    ans = rec["answer"]
    if isinstance(ans, bool):
        gold = "yes" if ans else "no"
    elif isinstance(ans, str) and ans.strip().lower() in ("yes", "no", "true", "false"):
        gold = "yes" if ans.strip().lower() in ("yes", "true") else "no"
    else:
        raise InvalidStructure(f"answer {ans!r} is not boolean")
    return Question(
        id=str(rec.get("qid") or rec.get("id") or f"q{i}"),
        text=rec["question"],
        gold_answer=gold,
        dataset=Dataset.STRATEGYQA,
    )


def load_dataset(path: str | Path, kind: Dataset | str) -> LoadedDataset:
    """Load questions; malformed records are skipped, logged and counted."""
    path = Path(path)
    kind = Dataset(kind)
    out = LoadedDataset([], kind)
    if kind is Dataset.GAME24:
        for i, line in enumerate(path.read_text(encoding="utf-8").splitlines()):
            if not line.strip():
                continue
            try:
                nums = [int(x) for x in line.split()]
                if len(nums) != 4:
                    raise ValueError(f"expected 4 integers, got {len(nums)}")
                out.questions.append(Question(f"g{i}", " ".join(map(str, nums)), dataset=Dataset.GAME24))
            except ValueError as exc:
                out.malformed.append((i, str(exc)))
    else:
        parse = _strategy if kind is Dataset.STRATEGYQA else _hotpot
        for i, rec in enumerate(_records(path)):
            try:
                out.questions.append(parse(i, rec))
            except (KeyError, TypeError, ValueError, AttributeError) as exc:
                out.malformed.append((i, f"{type(exc).__name__}: {exc}"))
    for i, reason in out.malformed:
        log.warning("%s: skipped malformed record %d (%s)", path, i, reason)
    return out
