"""Command line front end and the evaluation engine behind it.

Subcommands:

* ``corpus build``  assemble a corpus JSON file from a directory of text
* ``eval run``      score configured backends over domain prompts
* ``recommend``     sector-level model class recommendation
* ``pipeline run``  knowledge-augmented generation, end to end
* ``report plot``   turn a report CSV into gnuplot-ready TSV tables

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

The eval config is a JSON object.  ``corpus`` and ``models`` are
required; everything else has a default.  Paths are resolved relative
to the config file's directory.

    {
      "corpus": "corpus.json",
      "models": ["nlp", "kg", "ngram:2", "remote:http://host:8071"],
      "strategies": [
        {"name": "beam", "beam_width": 5},
        {"name": "greedy"},
        {"name": "sample", "temperature": 1.0, "seed": 0}
      ],
      "prompts": [{"domain": "textiles", "prompt": "..."}],
      "embeddings": "vectors.txt",
      "scores": "scores.csv",
      "kg": "senses.json",
      "max_new_tokens": 48,
      "retrieve_limit": 8,
      "expand_iterations": 2,
      "ngram_k": 1.0,
      "output": {"csv": "report.csv", "json": "report.json"}
    }

Report rows are one per (model, strategy, domain).  The retrieval and
expansion models do not decode, so their per-domain result is computed
once and replicated across the configured strategies; replicated rows
are flagged in the JSON mirror.  A row whose backend fails is recorded
under "failed" in the JSON mirror and left out of the CSV.
"""

from __future__ import annotations

import argparse
import csv
import json
import re
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import corpus as corpus_mod
from . import decision, lexkg, metrics
from . import ngram
from . import pipeline as pipeline_mod
from . import retrieval
from .errors import LklmError
from .genclient import ClientError, RemoteBackend

REPORT_COLUMNS = (
    "model",
    "strategy",
    "domain",
    "relevance",
    "transition_density",
    "coherence_cosine",
    "coherence_composite",
    "instructional",
    "load_ms",
    "inference_ms",
    "size_bytes",
)

DEFAULT_BEAM_WIDTH = 5
DEFAULT_MAX_NEW_TOKENS = 48
DEFAULT_NGRAM_ORDER = 2

_MODEL_SPEC_RE = re.compile(r"^(nlp|kg|ngram(?::[0-9]+)?|remote:https?://\S+)$")


class HarnessError(LklmError):
    pass


class EvalConfigError(HarnessError):
    """The eval config file is missing, malformed or inconsistent."""


class ReportFormatError(HarnessError):
    """A report CSV does not have the expected columns."""


def _data(name: str) -> Path:
    return Path(str(resources.files("lklm").joinpath("data", name)))


def packaged_scores_path() -> Path:
    """Path of the hand-assigned usability score table shipped with the
    package."""
    return _data("instructional_scores.csv")


def packaged_embeddings_path() -> Path:
    return _data("toy_glove.txt")


def default_prompts() -> list[tuple[str, str]]:
    """The shipped (domain, prompt) pairs, in file order."""
    data = json.loads(_data("prompts.json").read_text(encoding="utf-8"))
    return list(data.items())


# ---------------------------------------------------------------------------
# eval configuration


@dataclass
class Strategy:
    name: str
    beam_width: int | None = None
    temperature: float | None = None
    seed: int | None = None
    max_new_tokens: int | None = None


@dataclass
class EvalConfig:
    corpus_path: Path
    models: list[str]
    strategies: list[Strategy]
    prompts: list[tuple[str, str]]
    embeddings_path: Path
    scores_path: Path | None
    kg_path: Path | None
    max_new_tokens: int
    retrieve_limit: int
    expand_iterations: int
    ngram_k: float
    csv_path: Path
    json_path: Path


def _mk_strategy(raw: dict, position: int) -> Strategy:
    if not isinstance(raw, dict) or "name" not in raw:
        raise EvalConfigError(f"strategies[{position}] must be an object with a name")
    name = raw["name"]
    if name not in ngram.STRATEGIES:
        raise EvalConfigError(f"strategies[{position}]: unknown strategy {name!r}")
    strat = Strategy(
        name=name,
        beam_width=raw.get("beam_width"),
        temperature=raw.get("temperature"),
        seed=raw.get("seed"),
        max_new_tokens=raw.get("max_new_tokens"),
    )
    if name == "beam":
        strat.beam_width = strat.beam_width if strat.beam_width is not None else DEFAULT_BEAM_WIDTH
        if not isinstance(strat.beam_width, int) or strat.beam_width < 1:
            raise EvalConfigError(f"strategies[{position}]: beam_width must be an integer >= 1")
    elif strat.beam_width is not None:
        raise EvalConfigError(f"strategies[{position}]: beam_width is only valid for beam")
    if name == "sample":
        strat.temperature = strat.temperature if strat.temperature is not None else 1.0
        if not strat.temperature > 0:
            raise EvalConfigError(f"strategies[{position}]: temperature must be > 0")
        # fixed default seed keeps re-runs byte-identical
        strat.seed = strat.seed if strat.seed is not None else 0
    return strat


def load_eval_config(path: str | Path) -> EvalConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise EvalConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise EvalConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise EvalConfigError("config must be a JSON object")
    base = path.parent

    def _resolve(name: str) -> Path | None:
        value = data.get(name)
        if value is None:
            return None
        if not isinstance(value, str):
            raise EvalConfigError(f"{name} must be a path string")
        return base / value

    corpus_path = _resolve("corpus")
    if corpus_path is None:
        raise EvalConfigError("config needs a corpus path")

    models = data.get("models")
    if not isinstance(models, list) or not models:
        raise EvalConfigError("config needs a non-empty models list")
    for spec in models:
        if not isinstance(spec, str) or not _MODEL_SPEC_RE.match(spec):
            raise EvalConfigError(
                f"bad model spec {spec!r}; use nlp, kg, ngram[:order] or remote:URL"
            )

    raw_strategies = data.get("strategies", [{"name": "greedy"}])
    if not isinstance(raw_strategies, list) or not raw_strategies:
        raise EvalConfigError("strategies must be a non-empty list")
    strategies = [_mk_strategy(raw, i) for i, raw in enumerate(raw_strategies)]

    raw_prompts = data.get("prompts")
    if raw_prompts is None:
        prompts = default_prompts()
    else:
        if not isinstance(raw_prompts, list) or not raw_prompts:
            raise EvalConfigError("prompts must be a non-empty list")
        prompts = []
        for i, entry in enumerate(raw_prompts):
            if not isinstance(entry, dict) or "domain" not in entry or "prompt" not in entry:
                raise EvalConfigError(f"prompts[{i}] must have domain and prompt")
            prompts.append((str(entry["domain"]), str(entry["prompt"])))

    max_new = data.get("max_new_tokens", DEFAULT_MAX_NEW_TOKENS)
    if not isinstance(max_new, int) or max_new < 1:
        raise EvalConfigError("max_new_tokens must be an integer >= 1")
    retrieve_limit = data.get("retrieve_limit", 8)
    if not isinstance(retrieve_limit, int) or retrieve_limit < 1:
        raise EvalConfigError("retrieve_limit must be an integer >= 1")
    expand_iterations = data.get("expand_iterations", 2)
    if not isinstance(expand_iterations, int) or expand_iterations < 0:
        raise EvalConfigError("expand_iterations must be an integer >= 0")
    ngram_k = data.get("ngram_k", 1.0)
    if not isinstance(ngram_k, (int, float)) or isinstance(ngram_k, bool) or not ngram_k > 0:
        raise EvalConfigError("ngram_k must be a number > 0")

    output = data.get("output", {})
    if not isinstance(output, dict):
        raise EvalConfigError("output must be an object")
    csv_path = base / output.get("csv", "report.csv")
    json_path = base / output.get("json", "report.json")

    return EvalConfig(
        corpus_path=corpus_path,
        models=list(models),
        strategies=strategies,
        prompts=prompts,
        embeddings_path=_resolve("embeddings") or packaged_embeddings_path(),
        scores_path=_resolve("scores"),
        kg_path=_resolve("kg"),
        max_new_tokens=max_new,
        retrieve_limit=retrieve_limit,
        expand_iterations=expand_iterations,
        ngram_k=ngram_k,
        csv_path=csv_path,
        json_path=json_path,
    )


# ---------------------------------------------------------------------------
# backends


class RetrievalBackend:
    """Keyword retrieval posing as a generator: the response to a prompt
    is the top retrieved sentences of the prompt's domain, joined."""

    model_id = "nlp"
    decodes = False

    def __init__(self, corpus: corpus_mod.Corpus, load_ms: int = 0, limit: int = 8):
        self.corpus = corpus
        self.load_ms = load_ms
        self.limit = limit

    def info(self) -> dict:
        size = len(json.dumps(corpus_mod.corpus_to_dict(self.corpus)).encode("utf-8"))
        return {"model_id": self.model_id, "size_bytes": size, "load_ms": self.load_ms}

    def respond(self, prompt: str, domain: str | None) -> str:
        hits = retrieval.retrieve(self.corpus, prompt, domain=domain, limit=self.limit)
        return " ".join(hit.sentence.raw for hit in hits)


class ExpansionBackend:
    """Definition expansion posing as a generator.  Reported under the
    name of its lexicon so hand-scored tables join naturally."""

    model_id = "wordnet"
    decodes = False

    def __init__(self, kg: lexkg.KnowledgeGraph, load_ms: int = 0, iterations: int = 2):
        self.kg = kg
        self.load_ms = load_ms
        self.iterations = iterations

    def info(self) -> dict:
        size = len(json.dumps(lexkg.graph_to_dict(self.kg)).encode("utf-8"))
        return {"model_id": self.model_id, "size_bytes": size, "load_ms": self.load_ms}

    def respond(self, prompt: str, domain: str | None) -> str:
        return lexkg.expand_prompt(prompt, self.kg, iterations=self.iterations)


def build_backend(spec: str, cfg: EvalConfig, corpus: corpus_mod.Corpus, corpus_load_ms: int):
    if spec == "nlp":
        return RetrievalBackend(corpus, load_ms=corpus_load_ms, limit=cfg.retrieve_limit)
    if spec == "kg":
        t0 = time.perf_counter()
        kg = lexkg.load_graph(cfg.kg_path) if cfg.kg_path else lexkg.load_default_senses()
        load_ms = int((time.perf_counter() - t0) * 1000)
        return ExpansionBackend(kg, load_ms=load_ms, iterations=cfg.expand_iterations)
    if spec.startswith("ngram"):
        order = int(spec.split(":", 1)[1]) if ":" in spec else DEFAULT_NGRAM_ORDER
        return ngram.NGramBackend.from_corpus(corpus, n=order, k=cfg.ngram_k)
    if spec.startswith("remote:"):
        return RemoteBackend(spec.split(":", 1)[1])
    raise EvalConfigError(f"bad model spec {spec!r}")


# ---------------------------------------------------------------------------
# eval run


@dataclass
class ReportRow:
    model: str
    strategy: str
    domain: str
    relevance: float
    transition_density: float
    coherence_cosine: float
    coherence_composite: float
    instructional: float | None
    load_ms: float
    inference_ms: float
    size_bytes: int
    replicated: bool
    text: str


@dataclass
class FailedRow:
    model: str
    strategy: str
    domain: str
    error: str


@dataclass
class EvalReport:
    rows: list[ReportRow] = field(default_factory=list)
    failed: list[FailedRow] = field(default_factory=list)


def _domain_references(corpus: corpus_mod.Corpus, prompts: list[tuple[str, str]]) -> dict[str, str]:
    by_domain: dict[str, list[str]] = {}
    for doc in corpus.documents:
        for sent in doc.sentences:
            by_domain.setdefault(doc.domain, []).append(sent.raw)
    references = {}
    for domain, prompt in prompts:
        raws = by_domain.get(domain)
        # a domain with no reference documents falls back to its prompt
        references[domain] = " ".join(raws) if raws else prompt
    return references


def _score_for(
    scores: dict[tuple[str, str, str], float] | None,
    model_id: str,
    strategy: str,
    domain: str,
    decodes: bool,
) -> float | None:
    if scores is None:
        return None
    value = scores.get((model_id, strategy, domain))
    if value is None and not decodes:
        # strategy-less models are published under a "-" strategy
        value = scores.get((model_id, "-", domain))
    return value


def run_eval(cfg: EvalConfig) -> EvalReport:
    """Evaluate every configured (model, strategy, domain) triple and
    persist the report.  Backend failures become failed rows; the run
    itself carries on."""
    t0 = time.perf_counter()
    corpus = corpus_mod.load_corpus(cfg.corpus_path)
    corpus_load_ms = int((time.perf_counter() - t0) * 1000)
    embeddings = metrics.load_embeddings(cfg.embeddings_path)
    scores = metrics.load_scores(cfg.scores_path) if cfg.scores_path else None
    references = _domain_references(corpus, cfg.prompts)

    report = EvalReport()
    for spec in cfg.models:
        backend = build_backend(spec, cfg, corpus, corpus_load_ms)
        try:
            info = backend.info()
        except ClientError as exc:
            for strat in cfg.strategies:
                for domain, _ in cfg.prompts:
                    report.failed.append(FailedRow(spec, strat.name, domain, str(exc)))
            continue
        model_id = info["model_id"]
        decodes = getattr(backend, "decodes", True)

        def _finish(strat: Strategy, domain: str, prompt: str, text: str,
                    inference_ms: float, replicated: bool) -> None:
            rel = metrics.relevance(text, references[domain], embeddings)
            coh = metrics.coherence(text, prompt, embeddings)
            report.rows.append(ReportRow(
                model=model_id,
                strategy=strat.name,
                domain=domain,
                relevance=rel,
                transition_density=coh.transition_density,
                coherence_cosine=coh.cosine,
                coherence_composite=coh.composite,
                instructional=_score_for(scores, model_id, strat.name, domain, decodes),
                load_ms=float(info["load_ms"]),
                inference_ms=inference_ms,
                size_bytes=int(info["size_bytes"]),
                replicated=replicated,
                text=text,
            ))

        if decodes:
            for strat in cfg.strategies:
                max_new = strat.max_new_tokens or cfg.max_new_tokens
                for domain, prompt in cfg.prompts:
                    try:
                        result, wall_ms = metrics.time_generation(
                            lambda: backend.generate(
                                prompt,
                                strategy=strat.name,
                                beam_width=strat.beam_width,
                                max_new_tokens=max_new,
                                temperature=strat.temperature,
                                seed=strat.seed,
                            )
                        )
                    except LklmError as exc:
                        report.failed.append(FailedRow(model_id, strat.name, domain, str(exc)))
                        continue
                    ms = float(result.wall_ms) if result.wall_ms is not None else wall_ms
                    _finish(strat, domain, prompt, result.text, ms, replicated=False)
        else:
            once: dict[str, tuple[str, float]] = {}
            errors: dict[str, str] = {}
            for domain, prompt in cfg.prompts:
                try:
                    text, wall_ms = metrics.time_generation(
                        lambda: backend.respond(prompt, domain)
                    )
                    once[domain] = (text, wall_ms)
                except LklmError as exc:
                    errors[domain] = str(exc)
            for strat in cfg.strategies:
                for domain, prompt in cfg.prompts:
                    if domain in errors:
                        report.failed.append(FailedRow(model_id, strat.name, domain, errors[domain]))
                        continue
                    text, wall_ms = once[domain]
                    _finish(strat, domain, prompt, text, wall_ms, replicated=True)

    write_report_csv(report, cfg.csv_path)
    write_report_json(report, cfg.json_path)
    return report


def _csv_cells(row: ReportRow) -> list[str]:
    return [
        row.model,
        row.strategy,
        row.domain,
        f"{row.relevance:.6f}",
        f"{row.transition_density:.6f}",
        f"{row.coherence_cosine:.6f}",
        f"{row.coherence_composite:.6f}",
        "" if row.instructional is None else f"{row.instructional:g}",
        f"{row.load_ms:.3f}",
        f"{row.inference_ms:.3f}",
        str(row.size_bytes),
    ]


def write_report_csv(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for row in report.rows:
            writer.writerow(_csv_cells(row))


def write_report_json(report: EvalReport, path: str | Path) -> None:
    data = {
        "rows": [
            {
                "model": r.model,
                "strategy": r.strategy,
                "domain": r.domain,
                "relevance": r.relevance,
                "transition_density": r.transition_density,
                "coherence_cosine": r.coherence_cosine,
                "coherence_composite": r.coherence_composite,
                "instructional": r.instructional,
                "load_ms": r.load_ms,
                "inference_ms": r.inference_ms,
                "size_bytes": r.size_bytes,
                "replicated": r.replicated,
                "text": r.text,
            }
            for r in report.rows
        ],
        "failed": [
            {"model": f.model, "strategy": f.strategy, "domain": f.domain, "error": f.error}
            for f in report.failed
        ],
    }
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# report plot


def _safe_name(value: str) -> str:
    return re.sub(r"[^A-Za-z0-9_-]+", "_", value)


def plot_report(report_csv: str | Path, out_dir: str | Path) -> list[Path]:
    """Write gnuplot-ready TSV tables from a report CSV: one metric
    table per domain, plus timing, size and usability tables."""
    with open(report_csv, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(REPORT_COLUMNS):
            raise ReportFormatError(f"unexpected columns: {reader.fieldnames}")
        rows = list(reader)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def _write(name: str, header: list[str], lines: list[list[str]]) -> None:
        path = out / name
        body = "# " + "\t".join(header) + "\n"
        body += "".join("\t".join(line) + "\n" for line in lines)
        path.write_text(body, encoding="utf-8")
        written.append(path)

    domains = []
    for row in rows:
        if row["domain"] not in domains:
            domains.append(row["domain"])
    for domain in domains:
        lines = [
            [r["model"], r["strategy"], r["relevance"], r["transition_density"],
             r["coherence_cosine"], r["coherence_composite"], r["instructional"]]
            for r in rows
            if r["domain"] == domain
        ]
        _write(
            f"metrics_{_safe_name(domain)}.tsv",
            ["model", "strategy", "relevance", "transition_density",
             "coherence_cosine", "coherence_composite", "instructional"],
            lines,
        )

    _write(
        "timing.tsv",
        ["model", "strategy", "domain", "load_ms", "inference_ms"],
        [[r["model"], r["strategy"], r["domain"], r["load_ms"], r["inference_ms"]] for r in rows],
    )

    seen: list[tuple[str, str]] = []
    for row in rows:
        pair = (row["model"], row["size_bytes"])
        if pair not in seen:
            seen.append(pair)
    _write("size.tsv", ["model", "size_bytes"], [list(p) for p in seen])

    _write(
        "instructional.tsv",
        ["model", "strategy", "domain", "score"],
        [[r["model"], r["strategy"], r["domain"], r["instructional"]]
         for r in rows if r["instructional"]],
    )
    return written


# ---------------------------------------------------------------------------
# CLI


class _Usage(Exception):
    """Configuration or usage problem: exit 1."""


class _Failure(Exception):
    """Runtime problem after a valid configuration: exit 2."""


class _Parser(argparse.ArgumentParser):
    # the contract is exit 1 on usage errors, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="lklm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_corpus = sub.add_parser("corpus", help="corpus file operations")
    corpus_sub = p_corpus.add_subparsers(dest="corpus_command", required=True)
    p_build = corpus_sub.add_parser("build", help="build a corpus JSON from a text directory")
    p_build.add_argument("--in", dest="in_dir", required=True, help="directory of .txt sources")
    p_build.add_argument("--domain", help="domain label for all files")
    p_build.add_argument(
        "--map", dest="maps", action="append", default=[], metavar="PATTERN=DOMAIN",
        help="glob-to-domain mapping, first match wins, repeatable",
    )
    p_build.add_argument("--out", required=True, help="output corpus JSON path")

    p_eval = sub.add_parser("eval", help="evaluation runs")
    eval_sub = p_eval.add_subparsers(dest="eval_command", required=True)
    p_run = eval_sub.add_parser("run", help="run an evaluation from a config file")
    p_run.add_argument("--config", required=True, help="eval config JSON path")
    p_run.add_argument("--csv", help="override the report CSV path")
    p_run.add_argument("--json", dest="json_out", help="override the report JSON path")

    p_rec = sub.add_parser("recommend", help="recommend a model class for a sector")
    p_rec.add_argument("--sector", required=True)
    p_rec.add_argument("--compute-gb", type=float, required=True)
    p_rec.add_argument("--transparency", choices=decision.TRANSPARENCY_LEVELS, required=True)
    p_rec.add_argument("--matrix", help="sector dependency matrix JSON (default: shipped)")

    p_pipe = sub.add_parser("pipeline", help="knowledge-augmented generation")
    pipe_sub = p_pipe.add_subparsers(dest="pipeline_command", required=True)
    p_prun = pipe_sub.add_parser("run", help="run the pipeline for one task")
    p_prun.add_argument("--task", required=True)
    p_prun.add_argument("--library", required=True, help="knowledge library directory")
    p_prun.add_argument("--kg", help="sense graph JSON (default: shipped)")
    p_prun.add_argument("--robot", help="robot profile JSON (default: shipped)")
    p_prun.add_argument(
        "--backend", default=f"ngram:{DEFAULT_NGRAM_ORDER}",
        help="ngram[:order] trained on the library, or remote:URL",
    )
    p_prun.add_argument("--enrich", action="store_true", help="expand the task with definitions")
    p_prun.add_argument("--strategy", default="greedy", choices=ngram.STRATEGIES)
    p_prun.add_argument("--beam-width", type=int)
    p_prun.add_argument("--max-new-tokens", type=int, default=64)
    p_prun.add_argument("--temperature", type=float)
    p_prun.add_argument("--seed", type=int)
    p_prun.add_argument("--out", help="write the plan JSON here instead of stdout")

    p_report = sub.add_parser("report", help="report post-processing")
    report_sub = p_report.add_subparsers(dest="report_command", required=True)
    p_plot = report_sub.add_parser("plot", help="emit gnuplot-ready TSV tables")
    p_plot.add_argument("--in", dest="in_csv", required=True, help="report CSV path")
    p_plot.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_corpus_build(args) -> int:
    maps = []
    for entry in args.maps:
        pattern, sep, domain = entry.partition("=")
        if not sep or not pattern or not domain:
            raise _Usage(f"bad --map {entry!r}; expected PATTERN=DOMAIN")
        maps.append((pattern, domain))
    if args.domain:
        maps.append(("*", args.domain))
    if not maps:
        raise _Usage("give --domain or at least one --map")
    try:
        built = corpus_mod.build_corpus(args.in_dir, maps)
    except (LklmError, OSError) as exc:
        raise _Usage(str(exc)) from exc
    try:
        corpus_mod.save_corpus(built, args.out)
    except OSError as exc:
        raise _Failure(f"cannot write {args.out}: {exc}") from exc
    sentences = sum(len(d.sentences) for d in built.documents)
    print(f"{len(built.documents)} documents, {sentences} sentences -> {args.out}")
    return 0


def _cmd_eval_run(args) -> int:
    try:
        cfg = load_eval_config(args.config)
    except LklmError as exc:
        raise _Usage(str(exc)) from exc
    if args.csv:
        cfg.csv_path = Path(args.csv)
    if args.json_out:
        cfg.json_path = Path(args.json_out)
    try:
        report = run_eval(cfg)
    except (LklmError, OSError) as exc:
        raise _Failure(str(exc)) from exc
    print(f"{len(report.rows)} rows, {len(report.failed)} failed -> {cfg.csv_path}, {cfg.json_path}")
    return 0


def _cmd_recommend(args) -> int:
    try:
        matrix = decision.load_matrix(args.matrix) if args.matrix else None
        rec = decision.recommend(args.sector, args.compute_gb, args.transparency, matrix)
    except (LklmError, OSError) as exc:
        raise _Usage(str(exc)) from exc
    print(f"sector: {rec.sector}")
    print(f"dependency sum: {rec.dependency_sum} (tier {rec.tier})")
    print(f"recommended model class: {rec.model_class.value}")
    print("ranked: " + " > ".join(mc.value for mc in rec.ranked))
    for warning in rec.warnings:
        print(f"warning: {warning}")
    print(f"rationale: {rec.rationale}")
    return 0


def _cmd_pipeline_run(args) -> int:
    try:
        library = pipeline_mod.load_library(args.library)
        kg = lexkg.load_graph(args.kg) if args.kg else lexkg.load_default_senses()
        robot = pipeline_mod.load_robot(args.robot) if args.robot else pipeline_mod.default_robot()
        spec = args.backend
        if spec.startswith("ngram"):
            order = int(spec.split(":", 1)[1]) if ":" in spec else DEFAULT_NGRAM_ORDER
            backend = ngram.NGramBackend.from_corpus(pipeline_mod.library_corpus(library), n=order)
        elif spec.startswith("remote:") and _MODEL_SPEC_RE.match(spec):
            backend = RemoteBackend(spec.split(":", 1)[1])
        else:
            raise _Usage(f"bad --backend {spec!r}; use ngram[:order] or remote:URL")
    except (LklmError, OSError, ValueError) as exc:
        raise _Usage(str(exc)) from exc

    try:
        plan = pipeline_mod.run(
            args.task,
            library,
            kg=kg,
            robot=robot,
            backend=backend,
            enrich=args.enrich,
            strategy=args.strategy,
            beam_width=args.beam_width,
            max_new_tokens=args.max_new_tokens,
            temperature=args.temperature,
            seed=args.seed,
        )
    except LklmError as exc:
        raise _Failure(str(exc)) from exc
    if args.out:
        try:
            pipeline_mod.save_plan(plan, args.out)
        except OSError as exc:
            raise _Failure(f"cannot write {args.out}: {exc}") from exc
        print(f"plan -> {args.out}")
    else:
        print(json.dumps(pipeline_mod.plan_to_dict(plan), indent=2))
    return 0


def _cmd_report_plot(args) -> int:
    try:
        written = plot_report(args.in_csv, args.out)
    except (LklmError, OSError) as exc:
        raise _Usage(str(exc)) from exc
    for path in written:
        print(path)
    return 0


def cli(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "corpus":
            return _cmd_corpus_build(args)
        if args.command == "eval":
            return _cmd_eval_run(args)
        if args.command == "recommend":
            return _cmd_recommend(args)
        if args.command == "pipeline":
            return _cmd_pipeline_run(args)
        if args.command == "report":
            return _cmd_report_plot(args)
    except _Usage as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _Failure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    return cli(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
