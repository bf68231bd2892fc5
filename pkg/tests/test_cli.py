import json

import pytest

from branchsearch.cli import SETTINGS, main, render_trace, resolve_settings, search_config
from branchsearch.core import read_trace

from helpers import PUBLISHER

QUESTION = "Which company published both Bizarre and the magazine named after the writer Charles Fort?"
REPLAY = ["--backend", "replay", "--cassette", str(PUBLISHER / "cassette.jsonl"), "--corpus", str(PUBLISHER / "corpus.json")]


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    import os

    for k in list(os.environ):
        if k.startswith("BRANCHSEARCH_"):
            monkeypatch.delenv(k)


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_replay_prints_answer(tmp_path, capsys):
    code, out, err = run(["run", "--question", QUESTION, *REPLAY, "--out", str(tmp_path)], capsys)
    assert code == 0 and out.splitlines()[0] == "Dennis Publishing"
    assert "status: solved" in err
    traces = list((tmp_path / "traces" / "run").glob("*.jsonl"))
    assert len(traces) == 1 and read_trace(traces[0])[-1].payload["outcome"]["status"] == "solved"


def test_run_budget_exit_3(tmp_path, capsys):
    code, out, err = run(["run", "--question", QUESTION, *REPLAY, "--budget", "1", "--out", str(tmp_path)], capsys)
    assert code == 3 and "budget_exceeded" in err


def test_run_exhausted_exit_2(tmp_path, capsys):
    code, out, _ = run(["run", "--kind", "game24", "--question", "1 1 1 1", "--backend", "oracle", "--out", str(tmp_path)], capsys)
    assert code == 2 and out.strip() == "(no answer)"


def test_run_game24_oracle_solves(tmp_path, capsys):
    code, out, _ = run(["run", "--kind", "game24", "--question", "4 4 6 8", "--backend", "oracle", "--out", str(tmp_path)], capsys)
    assert code == 0 and out.strip()


@pytest.mark.parametrize(
    "args",
    [
        ["run", "--question", QUESTION, "--backend", "replay", "--cassette", "missing.jsonl", "--corpus", str(PUBLISHER / "corpus.json")],
        ["run", "--question", QUESTION, "--backend", "replay"],
        ["run", "--question", QUESTION, *REPLAY, "--k", "0"],
        ["run", "--question", QUESTION, *REPLAY, "--k", "many"],
        ["run", *REPLAY],
        ["run", "--question", QUESTION, "--backend", "replay", "--cassette", str(PUBLISHER / "cassette.jsonl")],
        ["run", "--question", QUESTION, "--backend", "oracle"],
    ],
)
def test_run_errors_exit_1(args, capsys, tmp_path):
    code, _, err = run([*args, "--out", str(tmp_path)], capsys)
    assert code == 1 and err.startswith("error:")


def test_run_from_dataset_id(tmp_path, capsys):
    code, out, _ = run(["run", "--dataset", str(PUBLISHER / "questions.json"), "--id", "publisher", *REPLAY, "--out", str(tmp_path)], capsys)
    assert code == 0 and "Dennis Publishing" in out
    assert (tmp_path / "traces" / "run" / "publisher.jsonl").exists()


def test_replay_renders_failed_branch_then_accepted_path(tmp_path, capsys):
    run(["run", "--question", QUESTION, *REPLAY, "--out", str(tmp_path), "--run-id", "x"], capsys)
    trace = next((tmp_path / "traces" / "x").glob("*.jsonl"))
    code, out, _ = run(["replay", str(trace)], capsys)
    assert code == 0
    lines = out.splitlines()
    fort = next(i for i, l in enumerate(lines) if l.startswith("Branch 0: Charles Fort"))
    bizarre = next(i for i, l in enumerate(lines) if l.startswith("Branch 1: Bizarre"))
    assert "FAILED" in lines[fort] and "FAILED" not in lines[bizarre] and fort < bizarre
    assert any("REJECTED" in l for l in lines[fort:bizarre])
    assert any("ACCEPTED" in l for l in lines[bizarre:])
    assert "Search[Bizarre magazine]" in out and "(pruned)" in out
    assert "Error records:" in out and lines[-1].startswith("Final: solved -> Dennis Publishing")


def test_replay_errors(tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    code, _, err = run(["replay", str(empty)], capsys)
    assert code == 1 and "line 1" in err
    good = tmp_path / "t"
    run(["run", "--question", QUESTION, *REPLAY, "--out", str(good)], capsys)
    lines = next(good.rglob("*.jsonl")).read_text().splitlines()
    gap = tmp_path / "gap.jsonl"
    gap.write_text("\n".join(lines[:3] + lines[4:]) + "\n")
    code, _, err = run(["replay", str(gap)], capsys)
    assert code == 1 and "line 4" in err and "seq gap" in err
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(lines[:2] + ["{oops"]) + "\n")
    code, _, err = run(["replay", str(bad)], capsys)
    assert code == 1 and "line 3" in err
    code, _, err = run(["replay", str(tmp_path / "nope.jsonl")], capsys)
    assert code == 1


def test_replay_is_byte_identical(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        run(["run", "--question", QUESTION, *REPLAY, "--out", str(tmp_path / name)], capsys)
        outs.append(next((tmp_path / name).rglob("*.jsonl")).read_bytes())
    assert outs[0] == outs[1]


def test_bench_game24_oracle(tmp_path, capsys):
    data = tmp_path / "g.txt"
    data.write_text("4 4 6 8\n1 1 1 1\nnot a puzzle\n")
    code, out, err = run(["bench", str(data), "--kind", "game24", "--backend", "oracle", "--out", str(tmp_path / "o")], capsys)
    assert code == 0 and "Accuracy (%)" in out and "50.00" in out
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["malformed_records"] == 1


def test_bench_replay_table(tmp_path, capsys):
    code, out, _ = run(["bench", str(PUBLISHER / "questions.json"), *REPLAY, "--out", str(tmp_path), "--no-extractor"], capsys)
    # With the extractor off the recorded replies no longer line up with the
    # prompts; the run still completes and reports the ablated config.
    assert code == 0 and "Hard" in out
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["config"]["extractor_enabled"] is False
    assert report["results"][0]["status"] == "exhausted"


def test_bench_total_failure_exit_1(tmp_path, capsys):
    empty_cassette = tmp_path / "c.jsonl"
    empty_cassette.write_text("")
    code, out, _ = run(
        ["bench", str(PUBLISHER / "questions.json"), "--backend", "replay", "--cassette", str(empty_cassette), "--corpus", str(PUBLISHER / "corpus.json"), "--out", str(tmp_path)],
        capsys,
    )
    assert code == 1 and "failed" in out


# --- precedence: flag > env > file > default -----------------------------------

SAMPLES = {
    "backend": ("record", "replay", "oracle"),
    "cassette": ("f.jsonl", "e.jsonl", "c.jsonl"),
    "corpus": ("f.json", "e.json", "c.json"),
    "kind": ("strategyqa", "game24", "custom"),
    "model": ("m-flag", "m-env", "m-file"),
    "base_url": ("http://flag", "http://env", "http://file"),
    "k": ("5", "6", 7),
    "max_depth": ("4", "5", 6),
    "max_branches": ("2", "3", 4),
    "budget": ("10", "11", 12),
    "temperature": ("0.1", "0.2", 0.3),
    "retries": ("0", "1", 3),
    "no_extractor": (True, "1", True),
    "no_step_eval": (True, "true", True),
    "no_answer_eval": (True, "yes", True),
    "cross_branch_siblings": (True, "on", True),
    "parallelism": ("8", "9", 10),
    "out": ("flag-out", "env-out", "file-out"),
    "run_id": ("flag-id", "env-id", "file-id"),
}


def test_every_setting_is_in_the_matrix():
    assert set(SAMPLES) == {s.name for s in SETTINGS}


@pytest.mark.parametrize("setting", SETTINGS, ids=lambda s: s.name)
@pytest.mark.parametrize("sources", ["", "F", "E", "EF", "L", "LF", "LE", "LEF"])
def test_precedence_matrix(setting, sources, tmp_path):
    flag_v, env_v, file_v = SAMPLES[setting.name]
    flags = {setting.name: flag_v} if "L" in sources else {}
    env = {setting.env: str(env_v)} if "E" in sources else {}
    cfg = None
    if "F" in sources:
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({setting.name: file_v}))
    got = resolve_settings(flags, env=env, config_file=cfg)[setting.name]
    if "L" in sources:
        expected = setting.convert(flag_v)
    elif "E" in sources:
        expected = setting.convert(env_v)
    elif "F" in sources:
        expected = setting.convert(file_v)
    else:
        expected = setting.default
    assert got == expected


def test_flags_env_and_file_reach_parser(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"budget": 1, "out": str(tmp_path / "from-file")}))
    monkeypatch.setenv("BRANCHSEARCH_CONFIG", str(cfg))
    code, _, _ = run(["run", "--question", QUESTION, *REPLAY], capsys)
    assert code == 3 and (tmp_path / "from-file").exists()
    monkeypatch.setenv("BRANCHSEARCH_BUDGET", "60")
    code, _, _ = run(["run", "--question", QUESTION, *REPLAY], capsys)
    assert code == 0
    code, _, _ = run(["run", "--question", QUESTION, *REPLAY, "--budget", "1"], capsys)
    assert code == 3


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"depth": 3}))
    code, _, err = run(["run", "--question", QUESTION, *REPLAY, "--config", str(cfg)], capsys)
    assert code == 1 and "unknown config keys" in err


def test_search_config_mapping():
    s = resolve_settings({"no_extractor": True, "no_answer_eval": True, "budget": "5"}, env={})
    cfg = search_config(s)
    assert not cfg.extractor_enabled and not cfg.answer_eval_enabled and cfg.step_eval_enabled and cfg.llm_call_budget == 5


def test_render_trace_without_final():
    from branchsearch.core import EventKind, Node, Search, Trace

    tr = Trace(deterministic=True)
    tr.emit(EventKind.EXTRACT, {"entities": ["A"]})
    tr.emit(EventKind.GENERATE, {"node": Node(0, 0, 0, None, "seed", Search("A")).to_dict(), "seed": True})
    text = render_trace(tr.events)
    assert "Branch 0: A" in text and "#0 Search[A]" in text
