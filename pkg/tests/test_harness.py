from __future__ import annotations

import csv
import json
import socket

import pytest

from conftest import data_path, toy_corpus
from lklm import conformance
from lklm import corpus as c
from lklm import harness as h
from lklm import ngram

DOMAINS = ("textiles", "electronics", "remanufacturing")


def free_port() -> int:
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


def write_eval_setup(tmp_path, models=("nlp", "kg", "ngram:2"), strategies=None, extra=None):
    c.save_corpus(toy_corpus(), tmp_path / "corpus.json")
    cfg = {
        "corpus": "corpus.json",
        "models": list(models),
        "strategies": strategies
        or [
            {"name": "beam", "beam_width": 2},
            {"name": "greedy"},
            {"name": "sample", "temperature": 1.0, "seed": 3},
        ],
        "scores": str(data_path("instructional_scores.csv")),
        "output": {"csv": "report.csv", "json": "report.json"},
    }
    if extra:
        cfg.update(extra)
    path = tmp_path / "eval.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


class TestEvalConfig:
    def test_defaults(self, tmp_path):
        c.save_corpus(toy_corpus(), tmp_path / "corpus.json")
        path = tmp_path / "eval.json"
        path.write_text(json.dumps({"corpus": "corpus.json", "models": ["nlp"]}))
        cfg = h.load_eval_config(path)
        assert [s.name for s in cfg.strategies] == ["greedy"]
        assert [d for d, _ in cfg.prompts] == list(DOMAINS)
        assert cfg.embeddings_path == h.packaged_embeddings_path()
        assert cfg.scores_path is None
        assert cfg.max_new_tokens == h.DEFAULT_MAX_NEW_TOKENS
        assert cfg.csv_path == tmp_path / "report.csv"

    def test_sample_gets_fixed_default_seed(self, tmp_path):
        c.save_corpus(toy_corpus(), tmp_path / "corpus.json")
        path = tmp_path / "eval.json"
        path.write_text(
            json.dumps(
                {"corpus": "corpus.json", "models": ["nlp"], "strategies": [{"name": "sample"}]}
            )
        )
        cfg = h.load_eval_config(path)
        assert cfg.strategies[0].seed == 0
        assert cfg.strategies[0].temperature == 1.0

    def test_beam_default_width(self, tmp_path):
        c.save_corpus(toy_corpus(), tmp_path / "corpus.json")
        path = tmp_path / "eval.json"
        path.write_text(
            json.dumps(
                {"corpus": "corpus.json", "models": ["nlp"], "strategies": [{"name": "beam"}]}
            )
        )
        assert h.load_eval_config(path).strategies[0].beam_width == h.DEFAULT_BEAM_WIDTH

    @pytest.mark.parametrize(
        "cfg",
        [
            {"models": ["nlp"]},  # no corpus
            {"corpus": "corpus.json", "models": []},
            {"corpus": "corpus.json", "models": ["markov"]},
            {"corpus": "corpus.json", "models": ["remote:ftp://x"]},
            {"corpus": "corpus.json", "models": ["nlp"], "strategies": [{"name": "exhaustive"}]},
            {
                "corpus": "corpus.json",
                "models": ["nlp"],
                "strategies": [{"name": "greedy", "beam_width": 2}],
            },
            {"corpus": "corpus.json", "models": ["nlp"], "prompts": []},
            {"corpus": "corpus.json", "models": ["nlp"], "max_new_tokens": 0},
        ],
    )
    def test_rejected_configs(self, tmp_path, cfg):
        path = tmp_path / "eval.json"
        path.write_text(json.dumps(cfg))
        with pytest.raises(h.EvalConfigError):
            h.load_eval_config(path)

    def test_not_json(self, tmp_path):
        path = tmp_path / "eval.json"
        path.write_text("{nope")
        with pytest.raises(h.EvalConfigError):
            h.load_eval_config(path)


@pytest.fixture(scope="module")
def report(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("eval")
    cfg = h.load_eval_config(write_eval_setup(tmp))
    return h.run_eval(cfg), cfg


class TestRunEval:
    def test_cardinality(self, report):
        rep, _ = report
        assert len(rep.rows) == 3 * 3 * 3
        assert not rep.failed

    def test_csv_shape(self, report):
        _, cfg = report
        rows = read_csv(cfg.csv_path)
        assert rows[0] == list(h.REPORT_COLUMNS)
        assert len(rows) == 1 + 27

    def test_replication_flags(self, report):
        rep, _ = report
        for row in rep.rows:
            assert row.replicated == (row.model in ("nlp", "wordnet"))

    def test_replicated_rows_identical_across_strategies(self, report):
        rep, _ = report
        for model in ("nlp", "wordnet"):
            for domain in DOMAINS:
                group = [r for r in rep.rows if r.model == model and r.domain == domain]
                assert len(group) == 3
                assert len({r.strategy for r in group}) == 3
                assert len({(r.relevance, r.coherence_cosine, r.text, r.inference_ms) for r in group}) == 1

    def test_instructional_join(self, report):
        rep, _ = report
        by_key = {(r.model, r.strategy, r.domain): r for r in rep.rows}
        assert by_key[("nlp", "greedy", "textiles")].instructional == 0.3
        assert by_key[("wordnet", "beam", "electronics")].instructional == 0.8
        assert by_key[("ngram:2", "greedy", "textiles")].instructional is None

    def test_bounds(self, report):
        rep, _ = report
        for row in rep.rows:
            assert -1.0 <= row.relevance <= 1.0
            assert row.transition_density >= 0.0
            assert -1.0 <= row.coherence_cosine <= 1.0
            assert 0.0 <= row.coherence_composite <= 1.0
            assert row.size_bytes > 0
            assert row.load_ms >= 0 and row.inference_ms >= 0

    def test_json_mirror(self, report):
        _, cfg = report
        data = json.loads(cfg.json_path.read_text(encoding="utf-8"))
        assert len(data["rows"]) == 27
        assert data["failed"] == []
        assert all("text" in r and "replicated" in r for r in data["rows"])

    def test_rerun_byte_identical_outside_timing(self, tmp_path):
        results = []
        for name in ("a", "b"):
            sub = tmp_path / name
            sub.mkdir()
            cfg = h.load_eval_config(write_eval_setup(sub))
            h.run_eval(cfg)
            rows = read_csv(cfg.csv_path)
            for row in rows[1:]:
                row[8] = row[9] = "-"  # timing columns may differ
            results.append(rows)
        assert results[0] == results[1]

    def test_unknown_domain_reference_falls_back_to_prompt(self, tmp_path):
        cfg_path = write_eval_setup(
            tmp_path,
            models=("ngram:2",),
            strategies=[{"name": "greedy"}],
            extra={"prompts": [{"domain": "nowhere", "prompt": "assemble the machine"}]},
        )
        rep = h.run_eval(h.load_eval_config(cfg_path))
        assert len(rep.rows) == 1
        row = rep.rows[0]
        assert row.relevance == pytest.approx(row.coherence_cosine)

    def test_unreachable_remote_rows_failed_others_complete(self, tmp_path):
        url = f"http://127.0.0.1:{free_port()}"
        cfg_path = write_eval_setup(tmp_path, models=("ngram:2", f"remote:{url}"))
        rep = h.run_eval(h.load_eval_config(cfg_path))
        assert len(rep.rows) == 9
        assert len(rep.failed) == 9
        assert all(f.model == f"remote:{url}" for f in rep.failed)
        data = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
        assert len(data["failed"]) == 9
        assert len(read_csv(tmp_path / "report.csv")) == 1 + 9

    def test_remote_rows_via_reference_server(self, tmp_path):
        backend = ngram.NGramBackend.from_corpus(toy_corpus(), n=2)
        with conformance.serve_backend(backend) as url:
            cfg_path = write_eval_setup(
                tmp_path, models=(f"remote:{url}",), strategies=[{"name": "greedy"}]
            )
            rep = h.run_eval(h.load_eval_config(cfg_path))
        assert len(rep.rows) == 3
        assert all(r.model == "ngram:2" for r in rep.rows)
        assert all(not r.replicated for r in rep.rows)


class TestPlotReport:
    def test_outputs(self, tmp_path):
        cfg = h.load_eval_config(write_eval_setup(tmp_path))
        h.run_eval(cfg)
        out = tmp_path / "plots"
        written = h.plot_report(cfg.csv_path, out)
        names = {p.name for p in written}
        assert names == {
            "metrics_textiles.tsv",
            "metrics_electronics.tsv",
            "metrics_remanufacturing.tsv",
            "timing.tsv",
            "size.tsv",
            "instructional.tsv",
        }
        for path in written:
            lines = path.read_text(encoding="utf-8").splitlines()
            assert lines[0].startswith("# ")
        metrics_lines = (out / "metrics_textiles.tsv").read_text().splitlines()
        assert len(metrics_lines) == 1 + 9
        timing_lines = (out / "timing.tsv").read_text().splitlines()
        assert len(timing_lines) == 1 + 27

    def test_bad_header(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("model,strategy\nnlp,greedy\n", encoding="utf-8")
        with pytest.raises(h.ReportFormatError):
            h.plot_report(bad, tmp_path / "plots")


class TestCli:
    def test_corpus_build(self, tmp_path, capsys):
        src = tmp_path / "texts"
        src.mkdir()
        (src / "textiles_one.txt").write_text("Spin the cotton. Weave the fabric.", encoding="utf-8")
        (src / "notes_two.txt").write_text("Assemble the machine.", encoding="utf-8")
        out = tmp_path / "corpus.json"
        code = h.cli(
            [
                "corpus", "build",
                "--in", str(src),
                "--map", "textiles_*=textiles",
                "--domain", "workshop",
                "--out", str(out),
            ]
        )
        assert code == 0
        built = c.load_corpus(out)
        assert {d.id: d.domain for d in built.documents} == {
            "textiles_one": "textiles",
            "notes_two": "workshop",
        }
        assert "2 documents" in capsys.readouterr().out

    def test_corpus_build_needs_mapping(self, tmp_path):
        src = tmp_path / "texts"
        src.mkdir()
        assert h.cli(["corpus", "build", "--in", str(src), "--out", str(tmp_path / "c.json")]) == 1

    def test_eval_run(self, tmp_path, capsys):
        cfg_path = write_eval_setup(tmp_path, models=("nlp",), strategies=[{"name": "greedy"}])
        assert h.cli(["eval", "run", "--config", str(cfg_path)]) == 0
        assert "3 rows, 0 failed" in capsys.readouterr().out
        assert (tmp_path / "report.csv").exists()

    def test_eval_run_bad_config(self, tmp_path):
        path = tmp_path / "eval.json"
        path.write_text(json.dumps({"models": ["nlp"]}))
        assert h.cli(["eval", "run", "--config", str(path)]) == 1

    def test_recommend(self, capsys):
        code = h.cli(["recommend", "--sector", "Automotive", "--compute-gb", "16", "--transparency", "low"])
        assert code == 0
        out = capsys.readouterr().out
        assert "recommended model class: LLM" in out
        assert "rationale:" in out

    def test_recommend_low_dependency_sector(self, capsys):
        code = h.cli(["recommend", "--sector", "Ceramics", "--compute-gb", "16", "--transparency", "low"])
        assert code == 0
        assert "recommended model class: NLP" in capsys.readouterr().out

    def test_recommend_unknown_sector(self, capsys):
        code = h.cli(["recommend", "--sector", "Quarry", "--compute-gb", "16", "--transparency", "low"])
        assert code == 1

    def test_pipeline_run(self, tmp_path, capsys):
        out = tmp_path / "plan.json"
        code = h.cli(
            [
                "pipeline", "run",
                "--task", "Assemble the circuit board",
                "--library", str(data_path("toy_library")),
                "--out", str(out),
            ]
        )
        assert code == 0
        plan = json.loads(out.read_text(encoding="utf-8"))
        assert plan["steps"]
        assert set(plan) == {"steps", "parts_checklist", "provenance", "warnings"}

    def test_pipeline_run_stdout(self, capsys):
        code = h.cli(
            [
                "pipeline", "run",
                "--task", "Assemble the circuit board",
                "--library", str(data_path("toy_library")),
            ]
        )
        assert code == 0
        plan = json.loads(capsys.readouterr().out)
        assert plan["steps"]

    def test_pipeline_bad_backend(self, capsys):
        code = h.cli(
            [
                "pipeline", "run",
                "--task", "x",
                "--library", str(data_path("toy_library")),
                "--backend", "nlp",
            ]
        )
        assert code == 1

    def test_report_plot(self, tmp_path, capsys):
        cfg_path = write_eval_setup(tmp_path, models=("nlp",), strategies=[{"name": "greedy"}])
        assert h.cli(["eval", "run", "--config", str(cfg_path)]) == 0
        capsys.readouterr()
        code = h.cli(
            ["report", "plot", "--in", str(tmp_path / "report.csv"), "--out", str(tmp_path / "plots")]
        )
        assert code == 0
        assert (tmp_path / "plots" / "timing.tsv").exists()

    def test_report_plot_missing_input(self, tmp_path):
        code = h.cli(["report", "plot", "--in", str(tmp_path / "none.csv"), "--out", str(tmp_path / "p")])
        assert code == 1

    def test_unknown_subcommand_exits_1(self, capsys):
        assert h.cli(["frobnicate"]) == 1

    def test_help_exits_0(self, capsys):
        assert h.cli(["--help"]) == 0
