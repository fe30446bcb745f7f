import json
import shutil
import subprocess
import sys
from importlib import resources
from pathlib import Path

import pytest

from irtestbed.trec import read_run

from cli_helpers import artifact_digests, run_all_commands, run_cli, sha

SURVEY = Path(str(resources.files("irtestbed") / "data" / "robust04_survey_synthetic.csv"))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    return run_all_commands(tmp_path_factory.mktemp("cli"), SURVEY)


def test_all_commands_produce_artifacts_and_manifests(workspace):
    out = workspace / "out"
    for name in ("index.bin", "bm25.run", "rm3.run", "model.json", "rr.run", "eval.json", "eval.tsv",
                 "eval.svg", "cv.json", "cv.tsv", "cv.svg", "meta/stats.json", "meta/stats.txt",
                 "meta/trends.json", "meta/plot.svg"):
        assert (out / name).is_file(), name
    for name in ("index.bin", "bm25.run", "model.json", "rr.run", "eval.json", "cv.json", "meta/stats.json"):
        m = json.loads((out / (name + ".manifest.json")).read_text())
        assert {"command", "config", "seed", "inputs", "version", "timestamp"} <= set(m)
    m = json.loads((out / "eval.json.manifest.json").read_text())
    assert m["inputs"]["run"]["sha256"] == sha(out / "rm3.run")


def test_run_files_well_formed(workspace):
    for line in (workspace / "out" / "rm3.run").read_text().splitlines()[:50]:
        qid, q0, docid, rank, score, tag = line.split()
        assert q0 == "Q0" and int(rank) >= 1 and len(score.split(".")[1]) >= 4
        assert tag == "bm25+rm3"


def test_cv_report_contents(workspace):
    rep = json.loads((workspace / "out" / "cv.json").read_text())
    assert rep["folds"]["mode"] == "five_fold" and rep["folds"]["seed"] == 5
    assert len(rep["splits"]) == 5 and all(s["alpha"] in (0.0, 0.5, 1.0) for s in rep["splits"])
    assert set(rep["tests"]) == {"ap", "ndcg@20"}
    assert rep["tests"]["ap"]["df"] == len(rep["baseline"]) - 1
    header = (workspace / "out" / "cv.tsv").read_text().splitlines()[0]
    assert header.startswith("topic\tap_baseline")


def test_rerun_is_byte_identical(workspace):
    first = artifact_digests(workspace)
    run_all_commands(workspace, SURVEY)
    assert artifact_digests(workspace) == first


def test_inputs_not_mutated(tmp_path):
    col = tmp_path / "col"
    assert run_cli("synth", "--out-dir", col, "--topics", "5", "--docs", "120") == 0
    before = {p.name: sha(p) for p in col.iterdir()}
    assert run_cli("index", "--docs", col / "docs.jsonl", "--output", tmp_path / "ix.bin") == 0
    assert run_cli("search", "--index", tmp_path / "ix.bin", "--topics", col / "topics.tsv",
                   "--output", tmp_path / "r.run", "--rm3") == 0
    assert run_cli("eval", "--qrels", col / "qrels.txt", "--run", tmp_path / "r.run",
                   "--output", tmp_path / "e.json") == 0
    assert {p.name: sha(p) for p in col.iterdir()} == before


def test_eval_identical_runs(workspace, tmp_path):
    out = workspace / "out"
    assert run_cli("eval", "--qrels", workspace / "col" / "qrels.txt", "--run", out / "rm3.run",
                   "--compare", out / "rm3.run", "--output", tmp_path / "same.json") == 0
    rep = json.loads((tmp_path / "same.json").read_text())
    assert rep["tests"]["ap"]["p"] == 1.0 and rep["tests"]["ap"]["t"] == 0.0


def test_rerank_alpha_zero_keeps_order(workspace, tmp_path):
    out = workspace / "out"
    run = read_run(out / "rm3.run")
    scores = tmp_path / "s.txt"
    scores.write_text("".join(f"{q} {d} {i % 7}\n" for q, rl in run.items() for i, d in enumerate(rl.docids)))
    assert run_cli("rerank", "--run", out / "rm3.run", "--scores", scores, "--alpha", "0",
                   "--output", tmp_path / "a0.run") == 0
    again = read_run(tmp_path / "a0.run")
    assert {q: rl.docids for q, rl in again.items()} == {q: rl.docids for q, rl in run.items()}


def test_errors_are_single_line(tmp_path, capsys):
    assert run_cli("eval", "--qrels", tmp_path / "missing.txt", "--run", tmp_path / "x", "--output",
                   tmp_path / "o.json") == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("irtestbed: error: ")
    assert run_cli("search", "--index") == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("irtestbed: error: usage")
    bad = tmp_path / "bad.csv"
    bad.write_text("id,year\n")
    assert run_cli("meta", "--records", bad, "--out-dir", tmp_path / "m") == 1
    assert "RecordError" in capsys.readouterr().err


def test_rerank_requires_scorer(workspace, tmp_path, capsys):
    assert run_cli("rerank", "--run", workspace / "out" / "rm3.run", "--alpha", "0.3",
                   "--output", tmp_path / "x.run") == 1
    assert "invalid-argument" in capsys.readouterr().err


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "irtestbed.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("irtestbed ")
    exe = shutil.which("irtestbed")
    if exe:
        assert subprocess.run([exe, "--help"], capture_output=True).returncode == 0
