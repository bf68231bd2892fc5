"""Benchmark harness: parallel solve runs, scoring, per-difficulty report."""

from __future__ import annotations

import json
import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Callable, Iterable, Mapping

from .core import Dataset, Question, SearchConfig, Status, Trace, validate_config
from .environments.base import Environment
from .environments.game24 import Game24Environment
from .explorer import solve
from .gateway import Gateway, Mode
from .metrics import exact_match, f1_score, yes_no

log = logging.getLogger(__name__)

REPORT_SCHEMA = "branchsearch.report/1"
LEVELS = ("easy", "medium", "hard")

EnvFactory = Callable[[Question], Environment]
HookFactory = Callable[[Question, Environment], Mapping]


@dataclass
class QuestionResult:
    id: str
    dataset: str
    difficulty: str | None
    status: str | None
    answer: str | None
    gold: str | None
    f1: float | None = None
    em: float | None = None
    correct: bool | None = None
    llm_calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    tool_calls: int = 0
    wall_time_ms: int = 0
    error: str | None = None
    trace_path: str | None = None

    @property
    def tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


def _mean(xs: Iterable[float | None]) -> float | None:
    xs = [x for x in xs if x is not None]
    return fmean(xs) if xs else None


@dataclass
class Report:
    run_id: str
    results: list[QuestionResult]
    config: dict
    malformed_records: int = 0
    columns: dict = field(init=False)

    def __post_init__(self):
        self.columns = {}
        for level in LEVELS:
            rs = [r for r in self.results if r.difficulty == level]
            if rs:
                self.columns[level] = self._summary(rs)
        self.columns["average"] = self._summary(self.results)

    @staticmethod
    def _summary(rs: list[QuestionResult]) -> dict:
        ok = [r for r in rs if r.error is None]
        return {
            "n": len(rs),
            "f1": _mean(r.f1 for r in ok),
            "em": _mean(r.em for r in ok),
            "accuracy": _mean(None if r.correct is None else float(r.correct) for r in ok),
            "tokens_per_task": _mean(r.tokens for r in ok),
            "wall_time_ms_per_task": _mean(r.wall_time_ms for r in ok),
        }

    @property
    def failures(self) -> list[QuestionResult]:
        return [r for r in self.results if r.error is not None]

    @property
    def total_prompt_tokens(self) -> int:
        return sum(r.prompt_tokens for r in self.results)

    @property
    def total_completion_tokens(self) -> int:
        return sum(r.completion_tokens for r in self.results)

    def to_dict(self) -> dict:
        statuses: dict[str, int] = {}
        for r in self.results:
            key = r.status or "error"
            statuses[key] = statuses.get(key, 0) + 1
        return {
            "schema": REPORT_SCHEMA,
            "run_id": self.run_id,
            "config": self.config,
            "n_questions": len(self.results),
            "malformed_records": self.malformed_records,
            "failures": len(self.failures),
            "status_counts": statuses,
            "columns": self.columns,
            "total_prompt_tokens": self.total_prompt_tokens,
            "total_completion_tokens": self.total_completion_tokens,
            "results": [r.__dict__ | {"tokens": r.tokens} for r in self.results],
        }

    def table(self) -> str:
        """Plain-text summary: one row per metric, difficulty columns then Average."""
        cols = [c for c in (*LEVELS, "average") if c in self.columns]
        head = f"{'':<16}" + "".join(f"{c.capitalize():>12}" for c in cols)
        rows = [head, "-" * len(head)]
        for key, label, scale in (
            ("n", "Questions", None),
            ("f1", "F1 (%)", 100),
            ("em", "EM (%)", 100),
            ("accuracy", "Accuracy (%)", 100),
            ("tokens_per_task", "Tokens/task", None),
            ("wall_time_ms_per_task", "Time/task (s)", 0.001),
        ):
            vals = [self.columns[c][key] for c in cols]
            if all(v is None for v in vals):
                continue
            cells = []
            for v in vals:
                if v is None:
                    cells.append(f"{'-':>12}")
                elif key == "n":
                    cells.append(f"{v:>12d}")
                else:
                    cells.append(f"{v * (scale or 1):>12.2f}")
            rows.append(f"{label:<16}" + "".join(cells))
        if self.failures:
            rows.append(f"{len(self.failures)} question(s) failed; see report.json")
        return "\n".join(rows)

    def write(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "report.json"
        path.write_text(json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        (out / "report.txt").write_text(self.table() + "\n", encoding="utf-8")
        return path


def _safe_name(qid: str) -> str:
    return re.sub(r"[^\w.-]", "_", qid) or "question"


def score(question: Question, answer: str | None) -> tuple[float | None, float | None]:
    if question.gold_answer is None:
        return None, None
    pred = answer or ""
    if question.dataset is Dataset.STRATEGYQA:
        pred = yes_no(pred) or pred
    return f1_score(pred, question.gold_answer).f1, float(exact_match(pred, question.gold_answer, question.dataset.value))


def _game24_correct(env: Environment, outcome) -> bool:
    if outcome.status is not Status.SOLVED or not isinstance(env, Game24Environment):
        return False
    return env.judge(None, outcome.answer, outcome.accepted_trajectory).on_topic


def run_benchmark(
    questions: Iterable[Question],
    environment: Environment | EnvFactory,
    gateway: Gateway,
    config: SearchConfig | dict | None = None,
    parallelism: int = 4,
    *,
    out_dir: str | Path | None = None,
    run_id: str | None = None,
    hooks: HookFactory | None = None,
    malformed_records: int = 0,
) -> Report:
    """Solve every question, score it, and aggregate.

    Per-question failures are recorded in the report rather than raised.
    With ``out_dir`` each trace goes to ``traces/<run-id>/<question-id>.jsonl``
    and the report to ``report.json`` / ``report.txt``.
    """
    cfg = validate_config(config)
    questions = list(questions)
    run_id = run_id or time.strftime("run-%Y%m%d-%H%M%S")
    trace_dir = Path(out_dir) / "traces" / run_id if out_dir else None
    make_env: EnvFactory = (lambda q: environment) if hasattr(environment, "new_session") else environment

    def one(q: Question) -> QuestionResult:
        res = QuestionResult(q.id, q.dataset.value, q.difficulty.value if q.difficulty else None, None, None, q.gold_answer)
        trace = Trace(deterministic=gateway.mode is Mode.REPLAY)
        try:
            env = make_env(q)
            extra = dict(hooks(q, env)) if hooks else {}
            outcome = solve(q, env, gateway, cfg, trace=trace, **extra)
        except Exception as exc:  # recorded, the run goes on
            log.exception("question %s failed", q.id)
            res.error = f"{type(exc).__name__}: {exc}"
        else:
            res.status = outcome.status.value
            res.answer = outcome.answer
            s = outcome.stats
            res.llm_calls, res.prompt_tokens, res.completion_tokens = s.llm_calls, s.prompt_tokens, s.completion_tokens
            res.tool_calls, res.wall_time_ms = s.tool_calls, s.wall_time_ms
            if q.dataset is Dataset.GAME24:
                res.correct = _game24_correct(env, outcome)
            else:
                res.f1, res.em = score(q, outcome.answer)
                if res.em is not None:
                    res.correct = bool(res.em)
        if trace_dir is not None and trace.events:
            res.trace_path = str(trace.write(trace_dir / f"{_safe_name(q.id)}.jsonl"))
        return res

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        results = list(pool.map(one, questions))
    report = Report(run_id, results, cfg.to_dict(), malformed_records)
    if out_dir is not None:
        report.write(out_dir)
    return report
