"""Command line: ``run`` one question, ``bench`` a dataset, ``replay`` a trace.

Every option can also come from an environment variable
``BRANCHSEARCH_<OPTION>`` (e.g. ``BRANCHSEARCH_MAX_DEPTH``) or from a JSON
config file (``--config`` / ``BRANCHSEARCH_CONFIG``) keyed by option name.
Precedence: flag > environment > file > default.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from .bench import run_benchmark
from .core import (
    Dataset,
    EventKind,
    Node,
    Question,
    SearchError,
    Status,
    Trace,
    TraceFormatError,
    nodes_from_events,
    read_trace,
    validate_config,
)
from .datasets import load_dataset
from .environments.game24 import COMPLETE_K, Game24Environment
from .environments.wiki import WikiEnvironment
from .explorer import solve
from .gateway import DEFAULT_MODEL, Cassette, Gateway, HttpBackend, Mode, ScriptedBackend

ENV_PREFIX = "BRANCHSEARCH_"
EXIT_SOLVED, EXIT_ERROR, EXIT_NO_ANSWER, EXIT_BUDGET = 0, 1, 2, 3


def _bool(v: Any) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _opt_int(v: Any) -> int | None:
    return None if v in (None, "", "none", "null") else int(v)


@dataclass(frozen=True)
class Setting:
    name: str
    convert: Callable[[Any], Any]
    default: Any
    help: str

    @property
    def env(self) -> str:
        return ENV_PREFIX + self.name.upper()

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


SETTINGS = (
    Setting("backend", str, "live", "live | record | replay | oracle (Game of 24 enumerator)"),
    Setting("cassette", str, None, "cassette JSONL for record/replay"),
    Setting("corpus", str, None, "corpus JSON (title -> paragraphs)"),
    Setting("kind", str, "hotpotqa", "dataset kind: hotpotqa | strategyqa | game24 | custom"),
    Setting("model", str, DEFAULT_MODEL, "model name sent to the endpoint"),
    Setting("base_url", str, None, "endpoint base URL (POSTs to <url>/v1/chat/completions)"),
    Setting("k", int, 3, "max children per expansion"),
    Setting("max_depth", int, 8, "max layer index per branch"),
    Setting("max_branches", _opt_int, None, "cap on seed entities"),
    Setting("budget", int, 60, "max completion calls per question"),
    Setting("temperature", float, 0.7, "sampling temperature"),
    Setting("retries", int, 2, "re-prompts on malformed model output"),
    Setting("no_extractor", _bool, False, "seed one branch with the whole question"),
    Setting("no_step_eval", _bool, False, "skip step feasibility ranking"),
    Setting("no_answer_eval", _bool, False, "accept the first Finish unconditionally"),
    Setting("cross_branch_siblings", _bool, False, "show same-depth nodes of earlier branches as siblings"),
    Setting("parallelism", int, 4, "questions solved concurrently by bench"),
    Setting("out", str, "runs", "output directory for traces and reports"),
    Setting("run_id", str, None, "run id (traces/<run-id>/...)"),
)
_BY_NAME = {s.name: s for s in SETTINGS}


def resolve_settings(
    flags: Mapping[str, Any],
    env: Mapping[str, str] | None = None,
    config_file: str | Path | None = None,
) -> dict[str, Any]:
    """Merge flag, environment, config-file and default values per setting."""
    env = os.environ if env is None else env
    config_file = config_file or env.get(ENV_PREFIX + "CONFIG")
    file_values: dict[str, Any] = {}
    if config_file:
        file_values = json.loads(Path(config_file).read_text(encoding="utf-8"))
        unknown = set(file_values) - set(_BY_NAME)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    for s in SETTINGS:
        if flags.get(s.name) is not None:
            out[s.name] = s.convert(flags[s.name])
        elif s.env in env:
            out[s.name] = s.convert(env[s.env])
        elif s.name in file_values:
            out[s.name] = s.convert(file_values[s.name])
        else:
            out[s.name] = s.default
    return out


def search_config(settings: Mapping[str, Any]):
    return validate_config(
        {
            "k": settings["k"],
            "max_depth": settings["max_depth"],
            "max_branches": settings["max_branches"],
            "temperature": settings["temperature"],
            "llm_call_budget": settings["budget"],
            "retries": settings["retries"],
            "extractor_enabled": not settings["no_extractor"],
            "step_eval_enabled": not settings["no_step_eval"],
            "answer_eval_enabled": not settings["no_answer_eval"],
            "cross_branch_siblings": settings["cross_branch_siblings"],
        }
    )


def make_gateway(settings: Mapping[str, Any]) -> Gateway:
    backend = settings["backend"]
    cassette = settings["cassette"]
    if backend == "replay":
        if not cassette:
            raise SearchError("--backend replay needs --cassette")
        if not Path(cassette).is_file():
            raise SearchError(f"cassette not found: {cassette}")
        return Gateway(Mode.REPLAY, cassette=Cassette.load(cassette), model=settings["model"])
    if backend == "oracle":
        return Gateway(Mode.LIVE, ScriptedBackend([]), model=settings["model"])
    http = HttpBackend(settings["base_url"])
    if backend == "record":
        if not cassette:
            raise SearchError("--backend record needs --cassette")
        return Gateway(Mode.RECORD, http, cassette_path=cassette, model=settings["model"])
    if backend == "live":
        return Gateway(Mode.LIVE, http, model=settings["model"])
    raise SearchError(f"unknown backend {backend!r}")


def make_task(settings: Mapping[str, Any]):
    """Environment (or per-question factory) and solve hooks for the dataset kind."""
    kind = Dataset(settings["kind"])
    if kind is Dataset.GAME24:
        oracle = settings["backend"] == "oracle"

        def hooks(q, env):
            h = {"judge_answer": env.judge}
            if oracle:
                h["generate"] = env.enumerating_generator()
            return h

        return Game24Environment.for_question, hooks
    if not settings["corpus"]:
        raise SearchError("--corpus is required for question-answering runs")
    return WikiEnvironment.load(settings["corpus"]), None


def _oracle_overrides(settings: dict) -> dict:
    # The enumerator replaces the model entirely (no extraction, no step judge)
    # and gets a k that lets it cover the whole game tree.
    if settings["backend"] == "oracle":
        if settings["kind"] != "game24":
            raise SearchError("--backend oracle only applies to --kind game24")
        k = max(settings["k"], COMPLETE_K)
        settings = {**settings, "k": k, "no_extractor": True, "no_step_eval": True}
    return settings


# ---------------------------------------------------------------------------
# commands


def cmd_run(args: argparse.Namespace, settings: dict) -> int:
    settings = _oracle_overrides(settings)
    cfg = search_config(settings)
    if args.question:
        kind = Dataset(settings["kind"])
        qid = args.id or "q-" + hashlib.sha256(args.question.encode("utf-8")).hexdigest()[:10]
        question = Question(qid, args.question, dataset=kind)
    elif args.dataset and args.id:
        matches = [q for q in load_dataset(args.dataset, settings["kind"]) if q.id == args.id]
        if not matches:
            raise SearchError(f"question id {args.id!r} not in {args.dataset}")
        question = matches[0]
    else:
        raise SearchError("give --question TEXT, or --dataset PATH with --id ID")
    gateway = make_gateway(settings)
    env_or_factory, hooks = make_task(settings)
    env = env_or_factory if hasattr(env_or_factory, "new_session") else env_or_factory(question)
    trace = Trace(deterministic=gateway.mode is Mode.REPLAY)
    try:
        outcome = solve(question, env, gateway, cfg, trace=trace, **(hooks(question, env) if hooks else {}))
    finally:
        run_id = settings["run_id"] or "run"
        trace_path = trace.write(Path(settings["out"]) / "traces" / run_id / f"{question.id}.jsonl")
    print(outcome.answer if outcome.answer is not None else "(no answer)")
    s = outcome.stats
    print(
        f"status: {outcome.status.value}  llm_calls: {s.llm_calls}  tokens: {s.total_tokens}  "
        f"errors: {len(outcome.errors)}",
        file=sys.stderr,
    )
    print(f"trace: {trace_path}", file=sys.stderr)
    return {Status.SOLVED: EXIT_SOLVED, Status.BUDGET_EXCEEDED: EXIT_BUDGET}.get(outcome.status, EXIT_NO_ANSWER)


def cmd_bench(args: argparse.Namespace, settings: dict) -> int:
    settings = _oracle_overrides(settings)
    cfg = search_config(settings)
    data = load_dataset(args.dataset, settings["kind"])
    if not data.questions:
        raise SearchError(f"no usable questions in {args.dataset}")
    if args.limit:
        data.questions = data.questions[: args.limit]
    gateway = make_gateway(settings)
    env, hooks = make_task(settings)
    report = run_benchmark(
        data.questions,
        env,
        gateway,
        cfg,
        settings["parallelism"],
        out_dir=settings["out"],
        run_id=settings["run_id"],
        hooks=hooks,
        malformed_records=len(data.malformed),
    )
    print(report.table())
    print(f"report: {Path(settings['out']) / 'report.json'}", file=sys.stderr)
    return EXIT_ERROR if len(report.failures) == len(report.results) else EXIT_SOLVED


def render_trace(events) -> str:
    """Indented branch/node tree with verdicts, rejections and backtracks."""
    nodes = nodes_from_events(events)
    children: dict[int | None, list[int]] = {}
    for n in nodes.values():
        children.setdefault(n.parent, []).append(n.id)
    notes: dict[int, list[str]] = {}
    entities: list[str] = []
    failed_branches: set[int] = set()
    errors: list[dict] = []
    final = None
    for ev in events:
        p = ev.payload
        if ev.kind is EventKind.EXTRACT:
            entities = p.get("entities", [])
            if p.get("fallback"):
                notes.setdefault(-1, []).append(f"extraction failed ({p['fallback']}); using the whole question")
        elif ev.kind is EventKind.ANSWER_EVAL:
            v = p["verdict"]
            tag = "ACCEPTED" if v["on_topic"] else "REJECTED"
            notes.setdefault(p["node_id"], []).append(f"<< {tag}: {v.get('rationale', '')}".rstrip(": "))
        elif ev.kind is EventKind.BACKTRACK:
            if p.get("reason") == "branch_exhausted":
                failed_branches.add(p["branch"])
            elif "node_id" in p:
                notes.setdefault(p["node_id"], []).append(f"<- backtrack ({p['reason']})")
        elif ev.kind is EventKind.ERROR_RECORD:
            errors.append(p["record"])
        elif ev.kind is EventKind.FINAL:
            final = p["outcome"]

    lines = []
    if entities:
        lines.append("Entities: " + ", ".join(entities))
    lines.extend(notes.get(-1, []))

    def walk(nid: int, indent: int) -> None:
        n: Node = nodes[nid]
        pad = "  " * indent
        tag = f"[{n.verdict.category.value}] " if n.verdict else ""
        pruned = "  (pruned)" if n.verdict and n.verdict.category.value == "impossible" else ""
        lines.append(f"{pad}#{n.id} {tag}{n.action}{pruned}")
        lines.append(f"{pad}   Thought: {n.thought}")
        if n.observation is not None:
            obs = n.observation if len(n.observation) <= 160 else n.observation[:157] + "..."
            lines.append(f"{pad}   Obs: {obs}")
        if n.verdict:
            lines.append(f"{pad}   Verdict: {n.verdict.rationale}")
        for note in notes.get(nid, []):
            lines.append(f"{pad}   {note}")
        for c in children.get(nid, []):
            walk(c, indent + 1)

    for root in children.get(None, []):
        b = nodes[root].branch
        label = entities[b] if b < len(entities) else nodes[root].action.payload
        status = "  ** FAILED: no accepted answer **" if b in failed_branches else ""
        lines.append(f"Branch {b}: {label}{status}")
        walk(root, 1)
    if errors:
        lines.append("Error records:")
        for i, e in enumerate(errors):
            lines.append(f"  {i + 1}. branch {e['branch']}: {e['rejected_answer']!r} - {e['rationale']}")
    if final:
        s = final["stats"]
        lines.append(
            f"Final: {final['status']}"
            + (f" -> {final['answer']}" if final.get("answer") else "")
            + f"  (llm_calls={s['llm_calls']}, tokens={s['prompt_tokens'] + s['completion_tokens']}, tool_calls={s['tool_calls']})"
        )
    return "\n".join(lines)


def cmd_replay(args: argparse.Namespace, settings: dict) -> int:
    events = read_trace(args.trace)
    print(render_trace(events))
    return EXIT_SOLVED


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file keyed by option name")
    common.add_argument("-v", "--verbose", action="store_true")
    for s in SETTINGS:
        if s.convert is _bool:
            common.add_argument(s.flag, dest=s.name, action="store_const", const=True, default=None, help=s.help)
        else:
            common.add_argument(s.flag, dest=s.name, default=None, help=f"{s.help} (default: {s.default})")

    parser = argparse.ArgumentParser(prog="branchsearch", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="solve one question")
    run.add_argument("--question", help="question text")
    run.add_argument("--id", help="question id (with --dataset, selects a record)")
    run.add_argument("--dataset", help="dataset file to pick --id from")
    run.set_defaults(func=cmd_run)
    bench = sub.add_parser("bench", parents=[common], help="run a dataset and report")
    bench.add_argument("dataset", help="dataset file")
    bench.add_argument("--limit", type=int, help="only the first N questions")
    bench.set_defaults(func=cmd_bench)
    rep = sub.add_parser("replay", help="render a trace file as a tree")
    rep.add_argument("trace", help="trace JSONL file")
    rep.set_defaults(func=cmd_replay)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = {} if args.command == "replay" else resolve_settings(vars(args), config_file=args.config)
        return args.func(args, settings)
    except TraceFormatError as exc:
        print(f"error: malformed trace: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (SearchError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
