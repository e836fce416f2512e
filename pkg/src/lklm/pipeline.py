"""Knowledge-augmented plan generation.

The pipeline walks five stages: extract supporting sentences from a
document library, summarise them (a remote model when available, an
extractive fallback otherwise), render the generation prompt from a
template, run the generation backend, and shape the output into an
imperative step plan with provenance back to the library.

Each stage failure is re-raised as :class:`PipelineStageError` carrying
the stage name, so callers can tell a broken library from a broken
backend without parsing messages.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import corpus as corpus_mod
from . import lexkg, retrieval
from .corpus import Corpus, Document, Sentence
from .errors import LklmError
from .genclient import BackendTimeoutError, RemoteBackend

LIBRARY_TAGS = ("instructions", "legislation", "ethics", "datasheet")


class PipelineError(LklmError):
    pass


class LibraryFormatError(PipelineError):
    """The library manifest or one of its files is unusable."""


class TemplateError(PipelineError):
    """The prompt template names a placeholder nobody can fill."""


class PlanEmptyError(PipelineError):
    """Generation produced no usable text."""


class PipelineStageError(PipelineError):
    """A stage failed; ``stage`` names which one."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class LibraryDoc:
    id: str
    tags: list[str]
    sentences: list[Sentence]


@dataclass
class Library:
    documents: list[LibraryDoc] = field(default_factory=list)

    def get(self, doc_id: str) -> LibraryDoc:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        raise KeyError(doc_id)


@dataclass
class LibraryHit:
    doc_id: str
    index: int
    sentence: Sentence
    legislation: bool


def load_library(root: str | Path) -> Library:
    """Read ``manifest.json`` (file name -> tag list) and ingest every
    listed file.  Unknown tags and missing files are errors; files not in
    the manifest are ignored."""
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise LibraryFormatError(f"no manifest.json under {root}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise LibraryFormatError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict):
        raise LibraryFormatError("manifest must map file names to tag lists")
    docs: list[LibraryDoc] = []
    for name in sorted(manifest):
        tags = manifest[name]
        if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
            raise LibraryFormatError(f"{name}: tags must be a list of strings")
        for tag in tags:
            if tag not in LIBRARY_TAGS:
                raise LibraryFormatError(f"{name}: unknown tag {tag!r}")
        path = root / name
        if not path.is_file():
            raise LibraryFormatError(f"manifest names missing file {name!r}")
        sentences = corpus_mod.process_text(path.read_text(encoding="utf-8"))
        docs.append(LibraryDoc(id=path.stem, tags=list(tags), sentences=sentences))
    return Library(documents=docs)


def library_corpus(library: Library) -> Corpus:
    """View the library as a one-domain corpus so retrieval and model
    training can run over it unchanged."""
    return Corpus(
        documents=[
            Document(id=doc.id, domain="library", sentences=doc.sentences)
            for doc in library.documents
        ]
    )


def extract_knowledge(library: Library, query: str, limit: int = 8) -> list[LibraryHit]:
    """Most relevant library sentences for the query, keyword-ranked."""
    tag_by_id = {doc.id: doc.tags for doc in library.documents}
    hits = retrieval.retrieve(library_corpus(library), query, limit=limit)
    return [
        LibraryHit(
            doc_id=h.doc_id,
            index=h.index,
            sentence=h.sentence,
            legislation="legislation" in tag_by_id[h.doc_id],
        )
        for h in hits
    ]


def summarize_extractive(hits: list[LibraryHit], max_sentences: int = 3) -> str:
    """Frequency-scored extractive summary: sentences whose content
    lemmas are most common across the hits, emitted in library order."""
    if not hits:
        return ""
    freq: dict[str, int] = {}
    for hit in hits:
        for lemma in corpus_mod.content_lemmas(hit.sentence.tokens):
            freq[lemma] = freq.get(lemma, 0) + 1
    scored = []
    for hit in hits:
        lemmas = corpus_mod.content_lemmas(hit.sentence.tokens)
        score = sum(freq[l] for l in lemmas) / max(1, len(hit.sentence.tokens))
        scored.append((-score, hit.doc_id, hit.index, hit))
    scored.sort(key=lambda row: row[:3])
    chosen = sorted(
        (row[3] for row in scored[:max_sentences]),
        key=lambda h: (h.doc_id, h.index),
    )
    return " ".join(h.sentence.raw for h in chosen)


def summarize(
    hits: list[LibraryHit],
    backend: RemoteBackend | None = None,
    max_sentences: int = 3,
    max_new_tokens: int = 64,
) -> str:
    """Compress the hits.  With a remote backend the joined text is fed
    through greedy generation; if that times out (or no backend is
    given) the extractive summary stands in."""
    if backend is None:
        return summarize_extractive(hits, max_sentences=max_sentences)
    joined = " ".join(hit.sentence.raw for hit in hits)
    try:
        result = backend.generate(joined, strategy="greedy", max_new_tokens=max_new_tokens)
    except BackendTimeoutError:
        return summarize_extractive(hits, max_sentences=max_sentences)
    return result.text


@dataclass
class RobotProfile:
    name: str
    arms: int
    gripper: str
    payload_kg: float
    capabilities: list[str] = field(default_factory=list)


def load_robot(path: str | Path) -> RobotProfile:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return RobotProfile(
            name=str(data["name"]),
            arms=int(data["arms"]),
            gripper=str(data["gripper"]),
            payload_kg=float(data["payload_kg"]),
            capabilities=[str(c) for c in data["capabilities"]],
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise PipelineError(f"bad robot profile {path}: {exc}") from exc


def default_robot() -> RobotProfile:
    data = json.loads(
        resources.files("lklm.data").joinpath("robot_default.json").read_text(encoding="utf-8")
    )
    return RobotProfile(
        name=data["name"],
        arms=data["arms"],
        gripper=data["gripper"],
        payload_kg=data["payload_kg"],
        capabilities=list(data["capabilities"]),
    )


def default_template() -> str:
    return resources.files("lklm.data").joinpath("plan_template.txt").read_text(encoding="utf-8")


_PLACEHOLDER_RE = re.compile(r"\{\{\s*([a-z_.]+)\s*\}\}")


def render(template: str, task: str, summary: str, robot: RobotProfile) -> str:
    """Fill {{task}}, {{summary}} and {{robot.*}} placeholders.  An
    unknown placeholder raises :class:`TemplateError` rather than passing
    through silently."""
    values = {
        "task": task,
        "summary": summary,
        "robot.name": robot.name,
        "robot.arms": str(robot.arms),
        "robot.gripper": robot.gripper,
        "robot.payload_kg": f"{robot.payload_kg:g}",
        "robot.capabilities": ", ".join(robot.capabilities),
    }

    def fill(match: re.Match) -> str:
        key = match.group(1)
        if key not in values:
            raise TemplateError(f"unknown placeholder {{{{{key}}}}}")
        return values[key]

    return _PLACEHOLDER_RE.sub(fill, template)


@dataclass
class Plan:
    steps: list[str]
    parts_checklist: list[str]
    provenance: dict
    warnings: list[str] = field(default_factory=list)


def _is_imperative(sentence: Sentence) -> bool:
    for tok in sentence.tokens:
        if tok.pos == "STOP":
            continue
        return tok.pos == "VERB"
    return False


def build_plan(
    generated_text: str,
    task: str,
    hits: list[LibraryHit],
) -> Plan:
    """Shape generated text into steps.  Imperative sentences (first
    content token a verb) become the steps; if none qualify every
    sentence is kept and the plan is flagged."""
    sentences = corpus_mod.process_text(generated_text)
    if not sentences:
        raise PlanEmptyError("generation produced no sentences")
    warnings: list[str] = []
    imperative = [s for s in sentences if _is_imperative(s)]
    if imperative:
        chosen = imperative
    else:
        chosen = sentences
        warnings.append("non-imperative output, kept all sentences")
    if any(hit.legislation for hit in hits):
        warnings.append("summary draws on legislation text")

    library_raws = {hit.sentence.raw: (hit.doc_id, hit.index) for hit in hits}
    step_origins: list[str] = []
    for s in chosen:
        origin = library_raws.get(s.raw)
        step_origins.append(f"library:{origin[0]}:{origin[1]}" if origin else "generated")

    parts = sorted(
        {
            tok.lemma
            for s in chosen
            for tok in s.tokens
            if tok.pos == "NOUN"
        }
    )
    provenance = {
        "task": task,
        "library": [
            {"doc_id": h.doc_id, "index": h.index, "legislation": h.legislation}
            for h in hits
        ],
        "steps": step_origins,
    }
    return Plan(
        steps=[s.raw for s in chosen],
        parts_checklist=parts,
        provenance=provenance,
        warnings=warnings,
    )


def plan_to_dict(plan: Plan) -> dict:
    return {
        "steps": list(plan.steps),
        "parts_checklist": list(plan.parts_checklist),
        "provenance": plan.provenance,
        "warnings": list(plan.warnings),
    }


def save_plan(plan: Plan, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(plan_to_dict(plan), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def run(
    task: str,
    library: Library,
    kg: lexkg.KnowledgeGraph,
    robot: RobotProfile,
    backend,
    enrich: bool = False,
    template: str | None = None,
    strategy: str = "greedy",
    beam_width: int | None = None,
    max_new_tokens: int = 64,
    temperature: float | None = None,
    seed: int | None = None,
    retrieve_limit: int = 8,
) -> Plan:
    """Run the full pipeline.  ``enrich`` switches definition expansion
    of the task on (two rounds); the expanded text drives both retrieval
    and the rendered prompt."""
    template = template if template is not None else default_template()

    try:
        enriched = lexkg.expand_prompt(task, kg, iterations=2 if enrich else 0)
        hits = extract_knowledge(library, enriched, limit=retrieve_limit)
    except LklmError as exc:
        raise PipelineStageError("extract", str(exc)) from exc

    try:
        remote = backend if isinstance(backend, RemoteBackend) else None
        summary = summarize(hits, backend=remote)
    except LklmError as exc:
        raise PipelineStageError("summarize", str(exc)) from exc

    try:
        prompt = render(template, task=enriched, summary=summary, robot=robot)
    except LklmError as exc:
        raise PipelineStageError("render", str(exc)) from exc

    try:
        result = backend.generate(
            prompt,
            strategy=strategy,
            beam_width=beam_width,
            max_new_tokens=max_new_tokens,
            temperature=temperature,
            seed=seed,
        )
    except LklmError as exc:
        raise PipelineStageError("generate", str(exc)) from exc

    try:
        return build_plan(result.text, task=task, hits=hits)
    except PlanEmptyError:
        raise
    except LklmError as exc:
        raise PipelineStageError("plan", str(exc)) from exc
