import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import pytest

from conftest import make_corpus
from trialsumm.cli import main
from trialsumm.ingest import load_corpus, save_corpus

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def registry():
    pages = {
        None: (FIXTURES / "ctgov_page1.json").read_bytes(),
        "tok-page-2": (FIXTURES / "ctgov_page2.json").read_bytes(),
    }

    class Handler(BaseHTTPRequestHandler):
        def do_GET(self):
            url = urlparse(self.path)
            if url.path != "/api/v2/studies":
                self.send_error(404)
                return
            token = parse_qs(url.query).get("pageToken", [None])[0]
            body = pages[token]
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()
    server.server_close()


def test_fetch_writes_corpus_and_attrition(registry, tmp_path, capsys):
    out = tmp_path / "fitbit.jsonl"
    code = main(["fetch", "--query", "Fitbit", "--base-url", registry, "--out", str(out), "--field", "oncology"])
    assert code == 0
    corpus = load_corpus(out)
    assert [t.id for t in corpus.trials] == ["NCT90000001", "NCT90000002"]
    assert corpus.device == "Fitbit" and corpus.field.name == "oncology"
    printed = capsys.readouterr().out
    assert "fetched 3 trials, kept 2" in printed
    assert "withdrawn" in printed and "enrollment_below_50" in printed


def test_fetch_with_labels(registry, tmp_path, capsys):
    labels = tmp_path / "labels.json"
    labels.write_text(json.dumps({"NCT90000001": ["oncology"], "NCT90000002": ["cardiology"]}))
    out = tmp_path / "onc.jsonl"
    assert main(["fetch", "--query", "Fitbit", "--base-url", registry, "--out", str(out),
                 "--field", "oncology", "--labels", str(labels)]) == 0
    assert [t.id for t in load_corpus(out).trials] == ["NCT90000001"]
    assert "other_field" in capsys.readouterr().out


def test_fetch_missing_query_is_usage_error(tmp_path, capsys):
    assert main(["fetch", "--out", str(tmp_path / "x.jsonl")]) == 2
    assert "--query" in capsys.readouterr().err


def test_fetch_unwritable_path(registry, tmp_path):
    target = tmp_path / "missing-dir" / "sub" / "x.jsonl"
    (tmp_path / "missing-dir").write_text("a file, not a directory")
    assert main(["fetch", "--query", "Fitbit", "--base-url", registry, "--out", str(target)]) == 1


def test_fetch_unreachable_registry(tmp_path):
    assert main(["fetch", "--query", "Fitbit", "--base-url", "http://127.0.0.1:9", "--out", str(tmp_path / "x.jsonl"),
                 "--max-records", "5"]) == 1


@pytest.fixture
def corpus_file(tmp_path):
    path = tmp_path / "c39.jsonl"
    save_corpus(make_corpus(39), path)
    return path


def test_summarize_mock(corpus_file, tmp_path, capsys):
    out, report = tmp_path / "s.txt", tmp_path / "s.json"
    assert main(["summarize", "--corpus", str(corpus_file), "--out", str(out), "--report", str(report)]) == 0
    printed = capsys.readouterr().out
    assert "llm calls: 4" in printed
    assert "hallucination events: 0" in printed
    record = json.loads(report.read_text())
    assert record["llm_call_count"] == 4
    assert record["config"]["run"]["backend"] == "mock"
    assert "\n\nReferences:\n[" in out.read_text()

    out2 = tmp_path / "s2.txt"
    assert main(["summarize", "--corpus", str(corpus_file), "--out", str(out2), "--report", str(tmp_path / "s2.json")]) == 0
    assert out2.read_text() == out.read_text()


def test_summarize_cache_rerun(corpus_file, tmp_path, capsys):
    args = ["summarize", "--corpus", str(corpus_file), "--cache-dir", str(tmp_path / "cache"), "--out", str(tmp_path / "s.txt")]
    assert main(args) == 0
    assert main(args) == 0
    assert capsys.readouterr().out.count("llm calls: 0") == 1


def test_summarize_http_without_credential(corpus_file, monkeypatch, capsys):
    monkeypatch.delenv("TRIALSUMM_TEST_KEY", raising=False)
    code = main(["summarize", "--corpus", str(corpus_file), "--backend", "http", "--api-key-env", "TRIALSUMM_TEST_KEY"])
    assert code == 2
    assert "TRIALSUMM_TEST_KEY" in capsys.readouterr().err


def test_config_precedence(corpus_file, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"batch-size": 10, "words_per_trial": 12, "full_batch_words": 240, "concurrency": 2}))
    report = tmp_path / "r.json"
    assert main(["summarize", "--config", str(cfg), "--corpus", str(corpus_file), "--batch-size", "20",
                 "--out", str(tmp_path / "o.txt"), "--report", str(report)]) == 0
    run = json.loads(report.read_text())["config"]["run"]
    assert run["batch_size"] == 20  # flag beats file
    assert run["concurrency"] == 2  # file beats default
    assert run["combine_max_words"] == 250  # default
    assert json.loads(report.read_text())["batch_sizes"] == [20, 19]


def test_inconsistent_budget_is_usage_error(corpus_file, capsys):
    assert main(["summarize", "--corpus", str(corpus_file), "--batch-size", "20"]) == 2
    assert "full-batch budget" in capsys.readouterr().err


def test_bad_config_file(corpus_file, tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("[1, 2]")
    assert main(["summarize", "--config", str(cfg), "--corpus", str(corpus_file)]) == 2
    assert main(["summarize", "--config", str(tmp_path / "nope.json"), "--corpus", str(corpus_file)]) == 2


def test_metrics_published_summary(tmp_path, capsys):
    assert main(["metrics", "--summary", str(FIXTURES / "published_summary.txt"), "--corpus-size", "39"]) == 0
    report = json.loads(capsys.readouterr().out)
    row = report["summaries"][0]
    assert row["unique_citations"] == 11
    assert row["coverage"] == pytest.approx(0.282, abs=1e-3)
    assert abs(row["words"] - 201) <= 5


def test_metrics_from_records(corpus_file, tmp_path, capsys):
    report = tmp_path / "s.json"
    main(["summarize", "--corpus", str(corpus_file), "--out", str(tmp_path / "s.txt"), "--report", str(report)])
    capsys.readouterr()
    out = tmp_path / "m.json"
    assert main(["metrics", "--record", str(report), "--summary", str(tmp_path / "s.txt"), "--corpus-size", "39",
                 "--sources", str(corpus_file), "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["summaries"][0] == data["summaries"][1]
    assert "readability_t_test" in data and "source_smog" in data


def test_metrics_rouge(tmp_path, capsys):
    a, empty = tmp_path / "a.txt", tmp_path / "e.txt"
    a.write_text("Fitbit devices track activity.")
    empty.write_text("")
    assert main(["metrics", "--rouge", str(a), str(a)]) == 0
    assert json.loads(capsys.readouterr().out) == {"rouge_l_f1": 1.0}
    assert main(["metrics", "--rouge", str(a), str(empty)]) == 1
    assert "EmptyInput" in capsys.readouterr().err


def test_metrics_needs_input(capsys):
    assert main(["metrics"]) == 2
